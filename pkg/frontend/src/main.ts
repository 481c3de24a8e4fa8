// Entry point: wire the runner to the page from query parameters.
//
//   ?api=http://127.0.0.1:8765   service base URL (default: same origin)
//   &experiment=exp-001          experiment id (required)
//   &fields=age,hearing_issues?  demographics inputs; a trailing "?"
//                                marks a field optional
//   &participant=p-042           optional fixed participant id

import { SessionApi } from "./api";
import { mountRunner, type DemographicField } from "./dom";
import { TrialRunner } from "./runner";

function parseFields(raw: string | null): DemographicField[] {
  if (!raw) return [];
  return raw
    .split(",")
    .map((part) => part.trim())
    .filter((part) => part.length > 0)
    .map((part) =>
      part.endsWith("?")
        ? { name: part.slice(0, -1), required: false }
        : { name: part, required: true },
    );
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const experiment = params.get("experiment");
  const root = document.getElementById("runner");
  if (!root) throw new Error('missing <div id="runner"> host element');
  if (!experiment) {
    root.textContent =
      "No experiment configured — open this page with ?experiment=<id>.";
    return;
  }
  const api = new SessionApi(params.get("api") ?? "");
  const runner = new TrialRunner(api, experiment);
  mountRunner(root, runner, parseFields(params.get("fields")));
}

boot();
