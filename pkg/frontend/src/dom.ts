// Browser view over TrialRunner: demographics form, then one screen
// per trial (play button, the two word buttons in the order the server
// sent them, rating rows, submit), then a completion screen. Keys 1
// and 2 pick the left/right word. All texts and orders come from the
// server payload; nothing is randomized here.

import { ApiError, TransportError } from "./api";
import { RunnerError, TrialRunner } from "./runner";

export interface DemographicField {
  name: string;
  required: boolean;
}

export function mountRunner(
  root: HTMLElement,
  runner: TrialRunner,
  fields: DemographicField[],
): void {
  const view = new RunnerDom(root, runner, fields);
  view.showDemographics();
}

class RunnerDom {
  private audioEl: HTMLAudioElement | null = null;
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly runner: TrialRunner,
    private readonly fields: DemographicField[],
  ) {}

  showDemographics(): void {
    const form = el("form", { className: "demographics" });
    form.appendChild(el("h2", { textContent: "Before we start" }));
    for (const field of this.fields) {
      const label = el("label", { textContent: `${field.name}: ` });
      const input = el("input", { name: field.name });
      input.required = field.required;
      label.appendChild(input);
      form.appendChild(label);
    }
    const error = el("p", { className: "error" });
    const go = el("button", { textContent: "Start", type: "submit" });
    form.append(error, go);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const demographics: Record<string, string> = {};
      for (const field of this.fields) {
        const input = form.elements.namedItem(field.name) as HTMLInputElement;
        demographics[field.name] = input.value.trim();
      }
      go.disabled = true;
      this.runner
        .start(demographics)
        .then(() => this.showCurrent())
        .catch((err) => {
          go.disabled = false;
          error.textContent = messageOf(err);
        });
    });
    this.swap(form);
  }

  private showCurrent(): void {
    if (this.runner.phase === "done") {
      this.showDone();
    } else {
      this.showTrial();
    }
  }

  private showTrial(): void {
    const view = this.runner.view;
    const trial = view.trial;
    if (!trial || !view.progress) return;

    const screen = el("div", { className: "trial" });
    screen.appendChild(
      el("p", {
        className: "progress",
        textContent: `Trial ${view.progress.index + 1} of ${view.progress.nTrials}`,
      }),
    );
    const error = el("p", { className: "error" });

    const play = el("button", { textContent: "▶ Play", type: "button" });
    play.addEventListener("click", () => {
      play.disabled = true;
      this.runner
        .play()
        .then((audio) => this.playBuffer(audio))
        .then(() => this.refresh(screen, play, optionButtons, submit))
        .catch((err) => {
          // a failed fetch did not consume the playback; leave the
          // button live so the participant can retry
          error.textContent = messageOf(err);
          this.refresh(screen, play, optionButtons, submit);
        });
    });

    const optionButtons = trial.options.map((option, i) => {
      const button = el("button", {
        textContent: `${i + 1}: ${option}`,
        type: "button",
        className: "option",
      });
      button.addEventListener("click", () => {
        try {
          this.runner.choose(option);
          error.textContent = "";
        } catch (err) {
          error.textContent = messageOf(err);
        }
        this.refresh(screen, play, optionButtons, submit);
      });
      return button;
    });

    const mosRows = el("div", { className: "mos" });
    for (const item of trial.questionnaire) {
      const row = el("p", { textContent: `${item.prompt} ` });
      for (let rating = 1; rating <= item.scale_points; rating++) {
        const pick = el("label", { textContent: String(rating) });
        const radio = el("input", { type: "radio", name: item.item_id });
        radio.addEventListener("change", () => {
          try {
            this.runner.answerMos(item.item_id, rating);
            error.textContent = "";
          } catch (err) {
            error.textContent = messageOf(err);
          }
          this.refresh(screen, play, optionButtons, submit);
        });
        pick.prepend(radio);
        row.appendChild(pick);
      }
      mosRows.appendChild(row);
    }

    const submit = el("button", { textContent: "Submit", type: "button" });
    submit.addEventListener("click", () => {
      submit.disabled = true;
      this.runner
        .submit()
        .then(() => this.showCurrent())
        .catch((err) => {
          error.textContent = messageOf(err);
          if (err instanceof RunnerError) {
            // stale-trial resync already advanced the runner
            this.showCurrent();
          } else {
            this.refresh(screen, play, optionButtons, submit);
          }
        });
    });

    const options = el("div", { className: "options" });
    options.append(...optionButtons);
    screen.append(play, options, mosRows, error, submit);

    this.bindKeys(optionButtons);
    this.swap(screen);
    this.refresh(screen, play, optionButtons, submit);
  }

  private showDone(): void {
    const screen = el("div", { className: "done" });
    screen.appendChild(el("h2", { textContent: "All done — thank you!" }));
    screen.appendChild(
      el("p", { textContent: "Your responses have been recorded." }),
    );
    this.bindKeys([]);
    this.swap(screen);
  }

  private refresh(
    screen: HTMLElement,
    play: HTMLButtonElement,
    optionButtons: HTMLButtonElement[],
    submit: HTMLButtonElement,
  ): void {
    const view = this.runner.view;
    play.disabled = !view.canPlay;
    submit.disabled = !view.canSubmit;
    optionButtons.forEach((button, i) => {
      button.classList.toggle("chosen", view.choice === view.trial?.options[i]);
    });
  }

  private bindKeys(optionButtons: HTMLButtonElement[]): void {
    if (this.keyHandler) {
      document.removeEventListener("keydown", this.keyHandler);
      this.keyHandler = null;
    }
    if (optionButtons.length === 0) return;
    this.keyHandler = (ev) => {
      if (ev.target instanceof HTMLInputElement) return;
      const index = ev.key === "1" ? 0 : ev.key === "2" ? 1 : -1;
      if (index >= 0) optionButtons[index]?.click();
    };
    document.addEventListener("keydown", this.keyHandler);
  }

  private playBuffer(audio: ArrayBuffer): Promise<void> {
    const url = URL.createObjectURL(new Blob([audio], { type: "audio/wav" }));
    if (this.audioEl) this.audioEl.pause();
    this.audioEl = new Audio(url);
    this.audioEl.addEventListener("ended", () => URL.revokeObjectURL(url));
    return this.audioEl.play();
  }

  private swap(screen: HTMLElement): void {
    this.root.replaceChildren(screen);
  }
}

function messageOf(err: unknown): string {
  if (err instanceof RunnerError) return err.message;
  if (err instanceof ApiError) return err.message;
  if (err instanceof TransportError) {
    return "connection problem — please try again";
  }
  return "something went wrong — please try again";
}

type ElProps<K extends keyof HTMLElementTagNameMap> = Partial<
  HTMLElementTagNameMap[K]
>;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  props: ElProps<K> = {},
): HTMLElementTagNameMap[K] {
  return Object.assign(document.createElement(tag), props);
}
