"""Command-line front end: one binary, subcommand per tool.

Conventions, kept uniform across subcommands:

* machine output (CSV, key=value lines) goes to stdout or to files;
  "wrote <path>" notes and human summaries go to stderr;
* exit 0 on success, 1 on a domain error (bad data, failed oracle,
  word not in lexicon), 2 on a usage error (click handles those);
* every stochastic step draws from the global ``--seed``;
* inputs are validated before anything is written.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from .ambiguity import (
    AmbiguityError,
    AnalyticMock,
    FormantPoint,
    StubFormantShifter,
    SubprocessOracle,
    search_ambiguous,
)
from .analysis import (
    AnalysisError,
    KernelError,
    anova_from_summary,
    chi_square_gof,
    group_kernel,
    group_kernel_tests,
    load_homophones,
    load_minimal_pairs,
    load_wer_fixture,
    one_way_anova,
    participant_kernel,
    participant_option_means,
    read_responses_csv,
    trials_from_manifest,
    tukey_hsd,
    wer_report,
)
from .clarity import (
    ClarityConfig,
    ClarityError,
    ClarityMode,
    build_duration_plan,
    build_validation_grid,
    parse_marked_text,
)
from .dsp import (
    DspError,
    apply_profiles,
    constant_profile,
    flatten_pitch,
    read_wav,
    write_wav,
)
from .features import (
    FEATURE_NAMES,
    FeaturesError,
    assign_clusters,
    cluster_ambiance_table,
    extract_features,
    kmeans,
    read_features_csv,
    robust_scale,
    silhouette_sweep,
    write_features_csv,
)
from .lexicon import LexiconError, load_lexicon, parse_lexicon
from .session import SessionError, SessionStore, build_app, config_from_json_file
from .stimgen import (
    BaseStimulus,
    ProfileKind,
    RandomizerConfig,
    StimgenError,
    make_trial_batch,
    read_manifest,
    read_profiles_csv,
    with_rendered_path,
    write_manifest,
)

log = logging.getLogger(__name__)

_DOMAIN_ERRORS = (
    AmbiguityError,
    AnalysisError,
    ClarityError,
    DspError,
    FeaturesError,
    KernelError,
    LexiconError,
    SessionError,
    StimgenError,
    OSError,
)


def _friendly(fn):
    """Turn domain exceptions into exit-1 errors on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _DOMAIN_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@dataclass
class AppContext:
    seed: int
    out_dir: Path

    def ensure_out_dir(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir


def _note(path: Path) -> None:
    click.echo(f"wrote {path}", err=True)


def _csv_stdout(header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    click.echo(buf.getvalue(), nl=False)


def _floats(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"{flag} needs comma-separated numbers")
    if not values:
        raise click.BadParameter(f"{flag} is empty")
    return values


def _formant_point(text: str, flag: str) -> FormantPoint:
    values = _floats(text, flag)
    if len(values) != 2:
        raise click.BadParameter(f"{flag} needs exactly F1,F2")
    return FormantPoint(values[0], values[1])


def _word_pair(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(parts):
        raise click.BadParameter("--words needs exactly two words: a,b")
    return parts[0], parts[1]


def _parse_ks(text: str) -> list[int]:
    """'2..10' | '4' | '2,4,8' -> candidate cluster counts."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            ks = list(range(int(lo), int(hi) + 1))
        else:
            ks = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise click.BadParameter("--k takes N, N..M, or a comma list")
    if not ks or any(k < 2 for k in ks):
        raise click.BadParameter("cluster counts must be >= 2")
    return ks


# ------------------------------------------------------------------ root

@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for every stochastic step.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path),
              default=Path("."), show_default=True,
              help="Directory for file outputs.")
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]),
              help="Diagnostic verbosity (stderr).")
@click.version_option(package_name="prosodykit")
@click.pass_context
def main(ctx: click.Context, seed: int, out_dir: Path, log_level: str) -> None:
    """Prosody toolkit: duration planning, stimulus generation, analysis."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = AppContext(seed=seed, out_dir=out_dir)


# --------------------------------------------------------------- lexicon

@main.group()
def lexicon() -> None:
    """Pronunciation dictionary queries."""


@lexicon.command("lookup")
@click.argument("words", nargs=-1, required=True)
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Dictionary file (default: packaged).")
@_friendly
def lexicon_lookup(words: tuple[str, ...], dict_path: str | None) -> None:
    """Print every pronunciation of each WORD."""
    lex = load_lexicon(dict_path)
    for word in words:
        entry = lex.lookup(word)
        if entry is None:
            raise LexiconError(f"not in lexicon: {word!r}")
        for pron in entry.pronunciations:
            click.echo(f"{entry.word}\t{' '.join(str(p) for p in pron)}")


@lexicon.command("validate")
@click.argument("dict_file", type=click.Path(exists=True, dir_okay=False))
@_friendly
def lexicon_validate(dict_file: str) -> None:
    """Parse DICT_FILE and report its size, or fail on the first bad line."""
    with open(dict_file, encoding="utf-8") as fh:
        lex = parse_lexicon(fh.read())
    click.echo(f"ok: {len(lex)} words")


# --------------------------------------------------------------- clarity

@main.group()
def clarity() -> None:
    """Second-language clarity duration planning."""


@clarity.command("plan")
@click.option("--text", required=True, help="Utterance, !word! flags targets.")
@click.option("--clarity", "clarity_switch", type=click.Choice(["on", "off"]),
              default="on", show_default=True,
              help="off = control condition, all multipliers 1.0.")
@click.option("--mode", type=click.Choice(["markup", "auto"]),
              default="markup", show_default=True,
              help="markup: only !flagged! words; auto: every eligible word.")
@click.option("--stretch-factor", type=float, default=1.6, show_default=True)
@click.option("--base-rate", type=float, default=0.75, show_default=True)
@click.option("--ramp-len", type=int, default=6, show_default=True)
@click.option("--dict", "dict_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Dictionary file (default: packaged).")
@_friendly
def clarity_plan(text: str, clarity_switch: str, mode: str,
                 stretch_factor: float, base_rate: float, ramp_len: int,
                 dict_path: str | None) -> None:
    """Per-phoneme duration multipliers as CSV on stdout."""
    config = ClarityConfig(
        stretch_factor=stretch_factor,
        base_rate=base_rate,
        ramp_len=ramp_len,
        mode=ClarityMode(mode),
    )
    plan = build_duration_plan(parse_marked_text(text), load_lexicon(dict_path), config)
    rows = plan.rows()
    if clarity_switch == "off":
        rows = [(ph, 1.0, "") for ph, _, _ in rows]
    _csv_stdout(
        ["phoneme", "multiplier", "span_kind"],
        [(ph, repr(float(mult)), kind) for ph, mult, kind in rows],
    )


@clarity.command("grid")
@_friendly
def clarity_grid() -> None:
    """The word/context rate validation grid as CSV on stdout."""
    _csv_stdout(
        ["condition", "step", "word_mult", "context_mult"],
        [
            (step.condition.value, i % 11, repr(step.word_mult), repr(step.context_mult))
            for i, step in enumerate(build_validation_grid())
        ],
    )


# --------------------------------------------------------------- stimgen

@main.group()
def stimgen() -> None:
    """Reverse-correlation stimulus batches."""


@stimgen.command("batch")
@click.option("--options", required=True,
              help="The two answer words, comma-separated.")
@click.option("--n-trials", type=int, required=True)
@click.option("--stimulus-id", default="stim-000", show_default=True)
@click.option("--audio", "audio_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Base recording noted in the manifest.")
@click.option("--n-windows", type=int, default=13, show_default=True)
@click.option("--window-s", type=float, default=0.1, show_default=True)
@click.option("--pitch-sigma", type=float, default=100.0, show_default=True,
              help="Pitch sigma in cents.")
@click.option("--stretch-sigma", type=float, default=1.0, show_default=True,
              help="Stretch sigma in log2 units.")
@click.option("--clip-sigmas", type=float, default=2.0, show_default=True)
@click.option("--stretch-domain", type=click.Choice(["log2", "linear"]),
              default="log2", show_default=True)
@click.option("--out", "out_name", default="manifest.jsonl", show_default=True,
              help="Manifest filename (under --out-dir unless absolute).")
@click.pass_obj
@_friendly
def stimgen_batch(app: AppContext, options: str, n_trials: int,
                  stimulus_id: str, audio_path: str | None, n_windows: int,
                  window_s: float, pitch_sigma: float, stretch_sigma: float,
                  clip_sigmas: float, stretch_domain: str, out_name: str) -> None:
    """Sample per-trial pitch/stretch profiles and write a trial manifest."""
    word_a, word_b = _word_pair(options)
    config = RandomizerConfig(
        n_windows=n_windows,
        window_s=window_s,
        pitch_sigma_cents=pitch_sigma,
        stretch_sigma_log2=stretch_sigma,
        clip_sigmas=clip_sigmas,
        seed=app.seed,
        stretch_domain=stretch_domain,
    )
    base = BaseStimulus(stimulus_id, word_a, word_b, audio_path=audio_path)
    trials = make_trial_batch([base], n_trials, config)
    out_path = Path(out_name)
    if not out_path.is_absolute():
        out_path = app.ensure_out_dir() / out_path
    write_manifest(out_path, trials)
    click.echo(str(out_path))


# ------------------------------------------------------------------- dsp

@main.group()
def dsp() -> None:
    """Phase-vocoder resynthesis."""


def _profile_of_kind(path: str, kind: ProfileKind):
    for profile in read_profiles_csv(path):
        if profile.kind is kind:
            return profile
    raise DspError(f"no {kind.value} profile in {path}")


@dsp.command("apply")
@click.option("--pitch-profile", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Breakpoint CSV; omitted = no shift.")
@click.option("--stretch-profile", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Breakpoint CSV; omitted = no stretch.")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Batch mode: render every trial in this manifest.")
@click.option("--audio", "audio_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Batch mode: the base recording to process.")
@click.argument("in_wav", type=click.Path(exists=True, dir_okay=False), required=False)
@click.argument("out_wav", type=click.Path(dir_okay=False), required=False)
@click.pass_obj
@_friendly
def dsp_apply(app: AppContext, pitch_profile: str | None,
              stretch_profile: str | None, manifest_path: str | None,
              audio_path: str | None, in_wav: str | None,
              out_wav: str | None) -> None:
    """Apply pitch/stretch profiles to IN_WAV, or render a whole manifest.

    Batch mode (--manifest + --audio) writes one WAV per trial into
    --out-dir plus an updated manifest recording the rendered filenames,
    and prints the new manifest path.
    """
    if manifest_path is not None:
        if in_wav or out_wav or pitch_profile or stretch_profile:
            raise click.UsageError("--manifest replaces profiles and WAV arguments")
        if audio_path is None:
            raise click.UsageError("--manifest needs --audio (the base recording)")
        base = read_wav(audio_path)
        trials = read_manifest(manifest_path)
        out_dir = app.ensure_out_dir()
        rendered = []
        for trial in trials:
            processed = apply_profiles(base, trial.pitch_profile, trial.stretch_profile)
            name = f"{trial.trial_id}.wav"
            write_wav(processed, out_dir / name)
            rendered.append(with_rendered_path(trial, name))
        out_manifest = out_dir / (Path(manifest_path).stem + ".rendered.jsonl")
        write_manifest(out_manifest, rendered)
        click.echo(str(out_manifest))
        return

    if not in_wav or not out_wav:
        raise click.UsageError("need IN_WAV and OUT_WAV (or --manifest --audio)")
    pitch = (_profile_of_kind(pitch_profile, ProfileKind.PITCH_CENTS)
             if pitch_profile else constant_profile(ProfileKind.PITCH_CENTS, 0.0))
    stretch = (_profile_of_kind(stretch_profile, ProfileKind.STRETCH_RATIO)
               if stretch_profile else constant_profile(ProfileKind.STRETCH_RATIO, 1.0))
    write_wav(apply_profiles(read_wav(in_wav), pitch, stretch), out_wav)
    _note(Path(out_wav))


@dsp.command("flatten")
@click.option("--hz", type=float, default=120.0, show_default=True,
              help="Target monotone f0.")
@click.argument("in_wav", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_wav", type=click.Path(dir_okay=False))
@_friendly
def dsp_flatten(hz: float, in_wav: str, out_wav: str) -> None:
    """Resynthesize IN_WAV with a constant pitch."""
    write_wav(flatten_pitch(read_wav(in_wav), target_hz=hz), out_wav)
    _note(Path(out_wav))


# -------------------------------------------------------------- features

@main.group()
def features() -> None:
    """Voice feature extraction and clustering."""


@features.command("extract")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_name", default="features.csv", show_default=True,
              help="Features CSV (under --out-dir unless absolute).")
@click.pass_obj
@_friendly
def features_extract(app: AppContext, directory: str, out_name: str) -> None:
    """Extract the feature profile of every WAV under DIRECTORY.

    The first subdirectory level names each file's ambiance
    (top-level files get "default").
    """
    root = Path(directory)
    wavs = sorted(root.rglob("*.wav"))
    if not wavs:
        raise FeaturesError(f"no .wav files under {root}")
    rows = []
    for wav in wavs:
        rel = wav.relative_to(root)
        ambiance = rel.parts[0] if len(rel.parts) > 1 else "default"
        try:
            vec = extract_features(read_wav(wav))
        except (DspError, FeaturesError) as exc:
            raise FeaturesError(f"{wav}: {exc}") from exc
        rows.append((wav.stem, ambiance, vec))
    out_path = Path(out_name)
    if not out_path.is_absolute():
        out_path = app.ensure_out_dir() / out_path
    write_features_csv(out_path, rows)
    click.echo(str(out_path))


def _impute_feature_matrix(matrix: np.ndarray) -> np.ndarray:
    """Fill unvoiced-pitch NaNs with the column median (0 if all-NaN)."""
    filled = matrix.copy()
    for col in range(filled.shape[1]):
        nans = np.isnan(filled[:, col])
        if not nans.any():
            continue
        rest = filled[~nans, col]
        value = float(np.median(rest)) if rest.size else 0.0
        log.info("imputing %d missing %s values with %g",
                 int(nans.sum()), FEATURE_NAMES[col], value)
        filled[nans, col] = value
    return filled


@features.command("cluster")
@click.argument("features_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", "k_spec", default="2..10", show_default=True,
              help="Cluster counts to try: N, N..M, or a comma list.")
@click.option("--report", is_flag=True,
              help="Also render model-selection and scatter figures.")
@click.pass_obj
@_friendly
def features_cluster(app: AppContext, features_csv: str, k_spec: str,
                     report: bool) -> None:
    """Robust-scale the features, sweep k, cluster at the best silhouette.

    Prints the silhouette-by-k sweep as CSV; writes per-utterance
    assignments and the ambiance/cluster mix next to it under
    --out-dir (plus PNG figures with --report).
    """
    ks = _parse_ks(k_spec)
    rows = read_features_csv(features_csv)
    if len(rows) < max(ks):
        raise FeaturesError(
            f"{len(rows)} utterances cannot support k={max(ks)}"
        )
    matrix = np.stack([vec.as_row() for _, _, vec in rows])
    scaled, _ = robust_scale(_impute_feature_matrix(matrix))

    sweep = silhouette_sweep(scaled, ks, seed=app.seed)
    _csv_stdout(["k", "silhouette"], [(k, repr(s)) for k, s in sweep])

    best_k = max(sweep, key=lambda pair: pair[1])[0]
    model = kmeans(scaled, best_k, seed=app.seed)
    assignments = assign_clusters(model, scaled)

    out_dir = app.ensure_out_dir()
    assignments_path = out_dir / "clusters.csv"
    with open(assignments_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "ambiance", "cluster"])
        for (utt_id, ambiance, _), cluster in zip(rows, assignments):
            writer.writerow([utt_id, ambiance, int(cluster)])
    _note(assignments_path)

    mix_path = out_dir / "ambiance_mix.csv"
    table = cluster_ambiance_table(
        [int(a) for a in assignments], [amb for _, amb, _ in rows]
    )
    with open(mix_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ambiance", "cluster", "share"])
        for ambiance, shares in table.items():
            for cluster, share in shares.items():
                writer.writerow([ambiance, cluster, repr(share)])
    _note(mix_path)

    if report:
        from .report import render_cluster_report

        for path in render_cluster_report(
            out_dir, sweep, scaled, assignments, model.centers, FEATURE_NAMES
        ):
            _note(path)


# --------------------------------------------------------------- analyze

@main.group()
def analyze() -> None:
    """Perception statistics and kernel estimation."""


def _load_choices(path: str) -> dict[str, dict[str, str]]:
    """participant -> {trial_id: choice} from a JSONL export or CSV."""
    by_participant: dict[str, dict[str, str]] = {}

    def add(record: dict, where: str) -> None:
        trial_id = record.get("trial_id")
        choice = record.get("choice")
        if not trial_id or not choice:
            raise AnalysisError(f"{where}: needs trial_id and choice")
        pid = record.get("participant_id") or "participant-0"
        by_participant.setdefault(str(pid), {})[str(trial_id)] = str(choice)

    if Path(path).suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.DictReader(fh), start=2):
                add(row, f"{path} line {i}")
    else:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise AnalysisError(f"{path} line {i}: {exc}") from exc
                add(record, f"{path} line {i}")
    if not by_participant:
        raise AnalysisError(f"no responses in {path}")
    return by_participant


def _write_kernel_csv(path: Path, kernel) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "value", "t_stat", "p_value", "ci95_lo", "ci95_hi"])
        for w, value in enumerate(kernel.values):
            test = kernel.window_tests[w] if kernel.window_tests else None
            writer.writerow([
                w,
                repr(value),
                *(("", "", "", "") if test is None else (
                    repr(test.t_stat), repr(test.p_value),
                    repr(test.ci95_lo), repr(test.ci95_hi),
                )),
            ])


@analyze.command("kernels")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Trial manifest the responses answer.")
@click.option("--responses", "responses_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSONL (session export) or CSV with trial_id,choice.")
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="Per-window significance level.")
@click.pass_obj
@_friendly
def analyze_kernels(app: AppContext, manifest_path: str, responses_path: str,
                    alpha: float) -> None:
    """Estimate pitch/stretch decision kernels from logged choices.

    One participant gives plain kernels; several give the group mean
    kernel with per-window paired t-tests. Writes kernel_pitch.csv and
    kernel_stretch.csv under --out-dir and prints a one-line summary
    per kernel.
    """
    specs = read_manifest(manifest_path)
    pairs = {frozenset(s.option_order) for s in specs}
    if len(pairs) != 1:
        raise AnalysisError(
            f"manifest holds {len(pairs)} option pairs; "
            "filter to one stimulus first"
        )
    by_participant = _load_choices(responses_path)

    kernels: dict[str, list] = {"pitch": [], "stretch": []}
    option_means: dict[str, list] = {"pitch": [], "stretch": []}
    n_answered = 0
    for pid in sorted(by_participant):
        choices = by_participant[pid]
        trials, options = trials_from_manifest(specs, choices)
        if not trials:
            raise AnalysisError(f"participant {pid}: no trials match the manifest")
        n_answered += len(trials)
        try:
            pk, sk = participant_kernel(trials, options)
        except KernelError as exc:
            raise KernelError(f"participant {pid}: {exc}") from exc
        kernels["pitch"].append(pk)
        kernels["stretch"].append(sk)
        pitch_means, stretch_means = participant_option_means(trials, options)
        option_means["pitch"].append(pitch_means)
        option_means["stretch"].append(stretch_means)

    out_dir = app.ensure_out_dir()
    n_participants = len(by_participant)
    for kind in ("pitch", "stretch"):
        if n_participants == 1:
            kernel = kernels[kind][0]
        else:
            tests = group_kernel_tests(option_means[kind])
            kernel = group_kernel(kernels[kind], window_tests=tests)
        path = out_dir / f"kernel_{kind}.csv"
        _write_kernel_csv(path, kernel)
        _note(path)
        n_sig = (sum(t.significant(alpha) for t in kernel.window_tests)
                 if kernel.window_tests else 0)
        click.echo(
            f"{kind}: windows={len(kernel.values)} trials={n_answered} "
            f"participants={n_participants} significant={n_sig}"
        )


@analyze.command("anova")
@click.option("--group", "groups", multiple=True,
              help="Raw scores, comma-separated; repeat per group.")
@click.option("--n", "n_spec", default=None,
              help="Summary mode: per-group n (scalar or comma list).")
@click.option("--means", default=None, help="Summary mode: group means.")
@click.option("--sds", default=None, help="Summary mode: group SDs.")
@_friendly
def analyze_anova(groups: tuple[str, ...], n_spec: str | None,
                  means: str | None, sds: str | None) -> None:
    """One-way ANOVA from raw groups or (n, mean, sd) summaries."""
    summary = (n_spec, means, sds)
    if groups and any(v is not None for v in summary):
        raise click.UsageError("use --group or --n/--means/--sds, not both")
    if groups:
        result = one_way_anova([_floats(g, "--group") for g in groups])
    elif all(v is not None for v in summary):
        ns = _floats(n_spec, "--n")
        result = anova_from_summary(
            ns[0] if len(ns) == 1 else ns,
            _floats(means, "--means"),
            _floats(sds, "--sds"),
        )
    else:
        raise click.UsageError("need --group ... or all of --n/--means/--sds")
    click.echo(
        f"F={result.statistic:.6g} df=({result.df[0]:.6g}, {result.df[1]:.6g}) "
        f"p={result.p_value:.4g} omega2={result.effect_size:.6g}"
    )


@analyze.command("tukey")
@click.option("--group", "groups", multiple=True, required=True,
              help="Raw scores, comma-separated; repeat per group.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@_friendly
def analyze_tukey(groups: tuple[str, ...], alpha: float) -> None:
    """All pairwise Tukey HSD comparisons as CSV on stdout."""
    pairs = tukey_hsd([_floats(g, "--group") for g in groups], alpha=alpha)
    _csv_stdout(
        ["group_i", "group_j", "mean_diff", "q_stat", "p_value", "reject"],
        [
            (p.group_i, p.group_j, repr(p.mean_diff), repr(p.q_stat),
             repr(p.p_value), str(p.reject).lower())
            for p in pairs
        ],
    )


@analyze.command("chi2")
@click.option("--counts", required=True, help="Observed counts, comma-separated.")
@click.option("--expected", default=None,
              help="Expected counts (default: uniform).")
@_friendly
def analyze_chi2(counts: str, expected: str | None) -> None:
    """Chi-squared goodness of fit."""
    result = chi_square_gof(
        _floats(counts, "--counts"),
        None if expected is None else _floats(expected, "--expected"),
    )
    click.echo(
        f"chi2={result.statistic:.6g} df={result.df[0]:.6g} "
        f"p={result.p_value:.4g}"
    )


# ------------------------------------------------------------------ eval

@main.group(name="eval")
def eval_group() -> None:
    """Transcription scoring."""


@eval_group.command("wer")
@click.option("--responses", "responses_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV of style,target_word,chosen_word,vowel_class.")
@click.option("--fixture", is_flag=True,
              help="Score the packaged synthetic transcription set.")
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Minimal-pair CSV (default: packaged).")
@click.option("--homophones", "homophones_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Homophone CSV (default: packaged).")
@_friendly
def eval_wer(responses_path: str | None, fixture: bool,
             pairs_path: str | None, homophones_path: str | None) -> None:
    """Per-style word error rates as CSV, substitution summary on stderr."""
    if fixture == (responses_path is not None):
        raise click.UsageError("need exactly one of --responses or --fixture")
    records = load_wer_fixture() if fixture else read_responses_csv(responses_path)
    report = wer_report(
        records, load_minimal_pairs(pairs_path), load_homophones(homophones_path)
    )
    _csv_stdout(
        ["style", "wer_pct", "tense_wer_pct", "lax_wer_pct",
         "n_responses", "n_errors"],
        [
            (style, f"{100 * sw.wer:.2f}", f"{100 * sw.tense_wer:.2f}",
             f"{100 * sw.lax_wer:.2f}", sw.n_responses, sw.n_errors)
            for style, sw in report.per_style.items()
        ],
    )
    sub = report.substitution
    click.echo(
        f"substitutions: {sub.sub_pct:.1%} of all errors "
        f"(tense-for-lax {sub.tense_for_lax_pct:.1%}, "
        f"lax-for-tense {sub.lax_for_tense_pct:.1%})",
        err=True,
    )


# ------------------------------------------------------------- ambiguity

@main.group()
def ambiguity() -> None:
    """Vowel-boundary formant search."""


@ambiguity.command("search")
@click.option("--origin", required=True, help="Start formants: F1,F2 in Hz.")
@click.option("--target", required=True, help="End formants: F1,F2 in Hz.")
@click.option("--words", required=True, help="The two candidate words: a,b.")
@click.option("--step", type=float, default=10.0, show_default=True,
              help="Grid step in Hz.")
@click.option("--oracle-cmd", default=None,
              help="External scorer (stdio line protocol).")
@click.option("--mock-linear-f1", type=float, default=None,
              help="Analytic demo oracle with delta = f1 - VALUE.")
@click.option("--audio-a", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Recording at the origin formants.")
@click.option("--audio-b", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Recording at the target formants.")
@click.option("--timeout", type=float, default=30.0, show_default=True,
              help="Per-call oracle timeout in seconds.")
@click.option("--max-workers", type=int, default=1, show_default=True,
              help="Concurrent oracle calls.")
@click.pass_obj
@_friendly
def ambiguity_search(app: AppContext, origin: str, target: str, words: str,
                     step: float, oracle_cmd: str | None,
                     mock_linear_f1: float | None, audio_a: str | None,
                     audio_b: str | None, timeout: float,
                     max_workers: int) -> None:
    """Grid-search the formant plane for the most ambiguous point.

    Scores every grid point from both endpoints and reports the
    smallest |log p(a) - log p(b)|. The built-in shifter is a stub
    (it passes the anchor audio through unchanged); plug a real
    resynthesis adapter for production searches. The full trace lands
    in ambiguity_trace.csv under --out-dir.
    """
    origin_point = _formant_point(origin, "--origin")
    target_point = _formant_point(target, "--target")
    word_pair = _word_pair(words)
    if (oracle_cmd is None) == (mock_linear_f1 is None):
        raise click.UsageError("need exactly one of --oracle-cmd or --mock-linear-f1")

    kwargs = dict(step_hz=step, max_workers=max_workers)
    if oracle_cmd is not None:
        if audio_a is None:
            raise click.UsageError("--oracle-cmd needs --audio-a")
        kwargs["audio_a"] = read_wav(audio_a)
        kwargs["audio_b"] = read_wav(audio_b) if audio_b else kwargs["audio_a"]
        with SubprocessOracle(oracle_cmd, timeout_s=timeout) as oracle:
            result = search_ambiguous(
                origin_point, target_point, StubFormantShifter(), oracle,
                word_pair, **kwargs,
            )
    else:
        mock = AnalyticMock(lambda p: p.f1_hz - mock_linear_f1)
        result = search_ambiguous(
            origin_point, target_point, mock, mock, word_pair, **kwargs
        )

    trace_path = app.ensure_out_dir() / "ambiguity_trace.csv"
    with open(trace_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction", "f1_hz", "f2_hz", "logp_a", "logp_b", "delta"])
        for entry in result.trace:
            writer.writerow([
                entry.direction.value, repr(entry.point.f1_hz),
                repr(entry.point.f2_hz), repr(entry.logp_a),
                repr(entry.logp_b), repr(entry.delta),
            ])
    _note(trace_path)
    for skip in result.skipped:
        click.echo(
            f"skipped {skip.direction.value} ({skip.point.f1_hz}, "
            f"{skip.point.f2_hz}): {skip.reason}",
            err=True,
        )
    click.echo(
        f"best_f1_hz={result.best.f1_hz:.6g} best_f2_hz={result.best.f2_hz:.6g} "
        f"delta_logprob={result.delta_logprob:.6g} "
        f"direction={result.direction.value} evaluated={len(result.trace)} "
        f"skipped={len(result.skipped)}"
    )


# ----------------------------------------------------------------- serve

@main.command("serve")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Experiment definition (JSON, v=1).")
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
@_friendly
def serve(app: AppContext, config_path: str, port: int, host: str) -> None:
    """Serve the 2AFC experiment API; logs land under --out-dir."""
    import uvicorn

    config = config_from_json_file(config_path)
    store = SessionStore(config, app.ensure_out_dir(), seed=app.seed)
    click.echo(
        f"serving experiment {config.experiment_id!r} "
        f"({config.n_trials} trials) on http://{host}:{port}",
        err=True,
    )
    uvicorn.run(build_app({config.experiment_id: store}), host=host, port=port)


if __name__ == "__main__":
    main()
