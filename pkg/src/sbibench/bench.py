"""Benchmark harness: run methods over sequences, aggregate, and render.

The evaluation matrix holds one metric report per (sequence, method) pair.
Aggregation follows the sequence-difficulty protocol: per-sequence medians
over methods, then direction-aware fractional ranking of the sequences per
metric, averaged into one rank per sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .bgmethods import (BlockMrfParams, SobsParams, WS2006Params,
                        blockmrf_background, median_background,
                        params_with_overrides, sobs_background,
                        ws2006_background)
from .metrics import DEFAULT_CONFIG, MetricConfig, MetricReport, compute_all
from .seqio import load_manifest, load_sequence

METRIC_COLUMNS = ("AGE", "EPs", "pEPs", "CEPs", "pCEPs", "MSSSIM", "PSNR", "CQM")
LOWER_BETTER = frozenset({"AGE", "EPs", "pEPs", "CEPs", "pCEPs"})
HIGHER_BETTER = frozenset({"MSSSIM", "PSNR", "CQM"})

_COLUMN_TO_FIELD = {
    "AGE": "age", "EPs": "eps", "pEPs": "p_eps", "CEPs": "ceps",
    "pCEPs": "p_ceps", "MSSSIM": "ms_ssim", "PSNR": "psnr", "CQM": "cqm",
}


@dataclass
class EvaluationMatrix:
    """Rows of (sequence, method, report); failed sequences are listed in
    `errors` as (sequence, message) and excluded from the rows."""

    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def __post_init__(self):
        pairs = [(s, m) for s, m, _ in self.rows]
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate (sequence, method) rows")

    def sequences(self) -> list:
        seen = dict.fromkeys(s for s, _, _ in self.rows)
        return list(seen)

    def methods(self) -> list:
        seen = dict.fromkeys(m for _, m, _ in self.rows)
        return list(seen)

    def value(self, sequence: str, method: str, column: str) -> float:
        for s, m, rep in self.rows:
            if s == sequence and m == method:
                return getattr(rep, _COLUMN_TO_FIELD[column])
        raise KeyError((sequence, method))


@dataclass
class SequenceAggregate:
    """Per-sequence medians over methods, plus the average rank once
    `rank_sequences` has run."""

    sequence: str
    medians: dict
    avg_rank: float | None = None


# ---------------------------------------------------------------------------
# method registry

_DEFAULT_PARAMS = {
    "median": None,
    "ws2006": WS2006Params(),
    "sobs": SobsParams(),
    "sobs-oracle": SobsParams(),
    "blockmrf": BlockMrfParams(),
}


def parse_method_list(text: str) -> list[tuple[str, dict]]:
    """Split a CLI method list like "median,ws2006:eps_stable=8,min_len=12"
    into (name, overrides) pairs.  A comma-separated token containing '='
    continues the parameter list of the method before it."""
    entries: list[tuple[str, dict]] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            name, _, first = token.partition(":")
            key, _, value = first.partition("=")
            if not value:
                raise ValueError(f"bad parameter override {first!r}")
            entries.append((name.strip(), {key.strip(): value.strip()}))
        elif "=" in token:
            if not entries:
                raise ValueError(f"parameter {token!r} appears before any method name")
            key, _, value = token.partition("=")
            entries[-1][1][key.strip()] = value.strip()
        else:
            entries.append((token, {}))
    if not entries:
        raise ValueError("empty method list")
    return entries


def build_method(name: str, overrides: dict | None = None):
    """Resolve a method name (plus parameter overrides) into a label and a
    callable (sequence, reference) -> background image."""
    overrides = overrides or {}
    if name not in _DEFAULT_PARAMS:
        raise ValueError(f"unknown method {name!r} (have {sorted(_DEFAULT_PARAMS)})")
    defaults = _DEFAULT_PARAMS[name]
    if defaults is None:
        if overrides:
            raise ValueError("median takes no parameters")
        params = None
    else:
        params = params_with_overrides(defaults, overrides)
    label = name
    if overrides:
        label += ":" + ",".join(f"{k}={overrides[k]}" for k in sorted(overrides))

    if name == "median":
        fn = lambda seq, gt: median_background(seq)
    elif name == "ws2006":
        fn = lambda seq, gt: ws2006_background(seq, params)
    elif name == "sobs":
        fn = lambda seq, gt: sobs_background(seq, params, extraction="frequency")
    elif name == "sobs-oracle":
        fn = lambda seq, gt: sobs_background(seq, params, extraction="oracle", gt=gt)
    else:
        fn = lambda seq, gt: blockmrf_background(seq, params)
    return label, fn


# ---------------------------------------------------------------------------
# running

def run(manifest, methods, metric_cfg: MetricConfig = DEFAULT_CONFIG,
        backgrounds: dict | None = None) -> EvaluationMatrix:
    """Evaluate every (sequence, method) cell.

    `manifest` is a manifest path or a list of SequenceSpec; `methods` is a
    list of method names, (name, overrides) pairs, or (label, callable)
    pairs.  A sequence that fails to load is reported in `errors` and
    skipped.  When `backgrounds` is a dict, computed background images are
    stored under (sequence, method).
    """
    if isinstance(manifest, (str, Path)):
        specs = load_manifest(manifest)
    else:
        specs = list(manifest)
    bound = []
    for m in methods:
        if isinstance(m, str):
            bound.extend(build_method(name, overrides)
                         for name, overrides in parse_method_list(m))
        elif callable(m[1]):
            bound.append(m)
        else:
            bound.append(build_method(m[0], m[1]))
    labels = [label for label, _ in bound]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate method labels in {labels}")
    matrix = EvaluationMatrix()
    for spec in specs:
        try:
            seq, gt = load_sequence(spec)
        except Exception as exc:  # report and move on; one bad sequence must not kill the run
            matrix.errors.append((spec.name, str(exc)))
            continue
        for label, fn in bound:
            cb = fn(seq, gt)
            if backgrounds is not None:
                backgrounds[(spec.name, label)] = cb
            matrix.rows.append((spec.name, label, compute_all(gt, cb, metric_cfg)))
    return matrix


# ---------------------------------------------------------------------------
# aggregation

def _median(values) -> float:
    """Sample median; +inf sentinels order above all finite values."""
    ordered = sorted(values)
    n = len(ordered)
    if n % 2:
        return ordered[n // 2]
    return (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0


def median_by_sequence(matrix: EvaluationMatrix) -> list[SequenceAggregate]:
    """Per-sequence median of every metric over the methods."""
    sequences = matrix.sequences()
    if not sequences:
        raise ValueError("empty matrix")
    by_seq = {s: {} for s in sequences}
    for s, m, rep in matrix.rows:
        by_seq[s][m] = rep
    method_sets = {frozenset(d) for d in by_seq.values()}
    if len(method_sets) != 1:
        raise ValueError("ragged matrix: sequences disagree on the method set")
    out = []
    for s in sequences:
        reports = [by_seq[s][m] for m in sorted(by_seq[s])]
        medians = {}
        for col in METRIC_COLUMNS:
            vals = [getattr(r, _COLUMN_TO_FIELD[col]) for r in reports]
            if any(v is None for v in vals):
                raise ValueError(f"metric {col} missing for sequence {s!r}")
            medians[col] = _median(vals)
        out.append(SequenceAggregate(sequence=s, medians=medians))
    return out


def _fractional_ranks(keyed: list) -> dict:
    """keyed: (sort_key, name) pairs; equal keys share the mean of the rank
    positions they span (1 = best)."""
    ordered = sorted(keyed)
    ranks = {}
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1][0] == ordered[i][0]:
            j += 1
        shared = (i + 1 + j + 1) / 2.0
        for k in range(i, j + 1):
            ranks[ordered[k][1]] = shared
        i = j + 1
    return ranks


def rank_sequences(aggregates: list[SequenceAggregate]) -> list[SequenceAggregate]:
    """Average the direction-aware fractional rank of each sequence over the
    eight metrics; the result is sorted best-first (ties by name)."""
    if len(aggregates) < 2:
        raise ValueError("ranking needs at least two sequences")
    totals = {a.sequence: 0.0 for a in aggregates}
    for col in METRIC_COLUMNS:
        keyed = []
        for a in aggregates:
            if col not in a.medians:
                raise ValueError(f"aggregate for {a.sequence!r} is missing {col}")
            v = a.medians[col]
            keyed.append((-v if col in HIGHER_BETTER else v, a.sequence))
        for name, r in _fractional_ranks(keyed).items():
            totals[name] += r
    ranked = [SequenceAggregate(a.sequence, dict(a.medians),
                                totals[a.sequence] / len(METRIC_COLUMNS))
              for a in aggregates]
    ranked.sort(key=lambda a: (a.avg_rank, a.sequence))
    return ranked


# ---------------------------------------------------------------------------
# rendering and parsing

def _fmt_count_median(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.1f}"


def _matrix_csv(matrix: EvaluationMatrix) -> str:
    lines = ["sequence,method," + ",".join(METRIC_COLUMNS)]
    for s, m, r in matrix.rows:
        cqm = "n/a" if r.cqm is None else f"{r.cqm:.4f}"
        lines.append(f"{s},{m},{r.age:.4f},{r.eps},{r.p_eps:.6f},{r.ceps},"
                     f"{r.p_ceps:.6f},{r.ms_ssim:.4f},{r.psnr:.4f},{cqm}")
    return "\n".join(lines) + "\n"


def _matrix_markdown(matrix: EvaluationMatrix) -> str:
    chunks = []
    for s in matrix.sequences():
        chunks.append(f"## {s}\n")
        chunks.append("| Method | AGE | EPs | pEPs | CEPs | pCEPs | MS-SSIM | PSNR | CQM |")
        chunks.append("|---|---:|---:|---:|---:|---:|---:|---:|---:|")
        for seq, m, r in matrix.rows:
            if seq != s:
                continue
            cqm = "n/a" if r.cqm is None else f"{r.cqm:.4f}"
            chunks.append(f"| {m} | {r.age:.4f} | {r.eps} | {r.p_eps * 100:.4f}% | "
                          f"{r.ceps} | {r.p_ceps * 100:.4f}% | {r.ms_ssim:.4f} | "
                          f"{r.psnr:.4f} | {cqm} |")
        chunks.append("")
    return "\n".join(chunks)


def _aggregates_csv(aggregates: list[SequenceAggregate]) -> str:
    lines = ["sequence,AvRank," + ",".join(METRIC_COLUMNS)]
    for a in aggregates:
        md = a.medians
        rank = "" if a.avg_rank is None else f"{a.avg_rank:.4f}"
        lines.append(
            f"{a.sequence},{rank},{md['AGE']:.4f},{_fmt_count_median(md['EPs'])},"
            f"{md['pEPs']:.6f},{_fmt_count_median(md['CEPs'])},{md['pCEPs']:.6f},"
            f"{md['MSSSIM']:.4f},{md['PSNR']:.4f},{md['CQM']:.4f}")
    return "\n".join(lines) + "\n"


def _aggregates_markdown(aggregates: list[SequenceAggregate]) -> str:
    lines = [
        "| Sequence | Av. rank | AGE | EPs | pEPs | CEPs | pCEPs | MS-SSIM | PSNR | CQM |",
        "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|",
    ]
    for a in aggregates:
        md = a.medians
        rank = "" if a.avg_rank is None else f"{a.avg_rank:.2f}"
        lines.append(
            f"| {a.sequence} | {rank} | {md['AGE']:.2f} | {_fmt_count_median(md['EPs'])} | "
            f"{md['pEPs'] * 100:.2f}% | {_fmt_count_median(md['CEPs'])} | "
            f"{md['pCEPs'] * 100:.2f}% | {md['MSSSIM']:.2f} | {md['PSNR']:.2f} | "
            f"{md['CQM']:.2f} |")
    return "\n".join(lines) + "\n"


def render(obj, format: str = "csv") -> str:
    """Render an EvaluationMatrix or a list of SequenceAggregate as csv or
    markdown text."""
    if format not in ("csv", "markdown"):
        raise ValueError(f"unknown format {format!r} (want csv or markdown)")
    if isinstance(obj, EvaluationMatrix):
        return _matrix_csv(obj) if format == "csv" else _matrix_markdown(obj)
    return _aggregates_csv(obj) if format == "csv" else _aggregates_markdown(obj)


def parse_matrix_csv(text: str) -> EvaluationMatrix:
    """Parse the CSV produced by `render(matrix, "csv")`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty table")
    header = lines[0].split(",")
    expected = ["sequence", "method", *METRIC_COLUMNS]
    if header != expected:
        raise ValueError(f"bad header {header!r}, expected {expected!r}")
    matrix = EvaluationMatrix()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(expected):
            raise ValueError(f"bad row {ln!r}")
        s, m = parts[0], parts[1]
        age_v, eps_v, p_eps_v, ceps_v, p_ceps_v, ms_v, psnr_v, cqm_v = parts[2:]
        matrix.rows.append((s, m, MetricReport(
            age=float(age_v),
            eps=int(eps_v),
            p_eps=float(p_eps_v),
            ceps=int(ceps_v),
            p_ceps=float(p_ceps_v),
            psnr=float(psnr_v),
            ms_ssim=float(ms_v),
            cqm=None if cqm_v == "n/a" else float(cqm_v),
        )))
    return matrix


def reference_matrix_path() -> Path:
    """Bundled accuracy table of five classic methods on the seven SBI
    sequences, used to exercise aggregation without the dataset."""
    return Path(__file__).parent / "fixtures" / "sbi_reference.csv"


def load_reference_matrix() -> EvaluationMatrix:
    return parse_matrix_csv(reference_matrix_path().read_text(encoding="utf-8"))
