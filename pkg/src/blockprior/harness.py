"""Experiment engine: Monte-Carlo phase-transition sweeps, weight and
sensitivity tables, bound tabulation, and deterministic CSV/SVG emission.

Sweeps are reproducible byte-for-byte: every trial derives its Philox
stream from (seed, row, column, trial), aggregation is order-free, CSV
floats are written with 17 significant digits and no timestamps enter the
emitted files. Cells run in a process pool capped by the
BLOCKPRIOR_WORKERS environment variable (or the config's "workers").
"""

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import measurement_bound, measurement_bound_weighted
from .errors import ConfigError, DomainError
from .model import (BlockStructure, PriorPartition, derive_seed,
                    expand_weights, make_ensemble, sample_instance)
from .solver import SolverConfig, recover, recovery_success
from .specfun import chi_norm_const, tail_moment1
from .weights import optimal_weight, optimal_weights, weight_sensitivity

MODES = ("heatmap", "transition-curve", "weights-table", "sensitivity-table",
         "bounds-table")

_CONFIG_KEYS = {
    "mode", "n", "q", "L", "sets", "rho", "alpha", "s_grid", "m_grid",
    "trials", "seed", "programs", "alpha_grid", "k_list", "flat_threshold",
    "solver", "workers",
}


@dataclass
class ExperimentConfig:
    mode: str
    n: int = 0
    q: int = 0
    L: int = 0  # optional; must match the partition when given
    sets: tuple = ()
    rho: tuple = ()
    alpha: tuple = ()
    s_grid: tuple = ()
    m_grid: tuple = ()
    trials: int = 25
    seed: int = 0
    programs: tuple = ()
    alpha_grid: tuple = ()
    k_list: tuple = (2, 10, 30)
    flat_threshold: float = 0.0
    solver: dict = field(default_factory=dict)
    workers: int = 0

    @classmethod
    def from_dict(cls, raw):
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "mode" not in raw:
            raise ConfigError("config needs a 'mode'")
        cfg = cls(**{k: _freeze(v) for k, v in raw.items()})
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode in ("heatmap", "transition-curve", "bounds-table"):
            if self.n < 1 or self.q < 1 or self.n % self.q:
                raise ConfigError(f"need q | n, got n={self.n}, q={self.q}")
        if self.mode in ("heatmap", "transition-curve"):
            if not self.m_grid:
                raise ConfigError("sweep needs a nonempty m_grid")
            for m in self.m_grid:
                if not 1 <= m <= self.n:
                    raise ConfigError(f"m={m} outside [1, n={self.n}]")
            if self.trials < 1:
                raise ConfigError("trials must be >= 1")
        if self.mode in ("heatmap", "bounds-table"):
            for s in self.s_grid:
                if not 0 <= s <= self.q:
                    raise ConfigError(f"s={s} outside [0, q={self.q}]")
            if not self.s_grid:
                raise ConfigError(f"{self.mode} needs a nonempty s_grid")
        if self.mode == "transition-curve":
            try:
                # support counts must be exact before any trial runs
                partition = self.partition()
                partition.support_counts()
            except DomainError as exc:
                raise ConfigError(str(exc)) from exc
            if self.L and self.L != partition.L:
                raise ConfigError(f"L={self.L} but the partition has {partition.L} sets")
        if self.mode in ("weights-table", "sensitivity-table"):
            if not self.alpha_grid or not self.k_list:
                raise ConfigError(f"{self.mode} needs alpha_grid and k_list")

    def partition(self):
        if self.sets:
            return PriorPartition(q=self.q, sets=self.sets, alpha=self.alpha)
        if self.rho:
            return PriorPartition.from_fractions(self.q, self.rho, self.alpha)
        raise ConfigError("partition requires 'sets' or 'rho' plus 'alpha'")

    def solver_config(self):
        try:
            return SolverConfig(**self.solver)
        except TypeError as exc:
            raise ConfigError(f"bad solver options: {exc}") from exc

    @property
    def k(self):
        return self.n // self.q


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _worker_count(config):
    if config.workers:
        return config.workers
    env = os.environ.get("BLOCKPRIOR_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class SweepResult:
    mode: str
    row_name: str
    row_labels: tuple
    m_grid: tuple
    trials: int
    successes: np.ndarray
    predicted: tuple  # per row: (q*m_hat, q*band_low, q*band_high)
    meta: dict

    @property
    def rates(self):
        return self.successes / self.trials


def _run_cell(payload):
    (row, mi, m, trials, seed, n, q, k, sets, alpha, w, solver_kwargs) = payload
    structure = BlockStructure(n=n, q=q, k=k)
    partition = PriorPartition(q=q, sets=sets, alpha=alpha)
    solver_cfg = SolverConfig(**solver_kwargs)
    w = np.asarray(w)
    wins = 0
    for t in range(trials):
        inst = sample_instance(structure, partition, derive_seed(seed, row, mi, t, 0))
        ens = make_ensemble(inst.x, m, derive_seed(seed, row, mi, t, 1))
        out = recover(ens, w, solver_cfg)
        wins += recovery_success(out.x_hat, inst.x, solver_cfg.success_threshold)
    return row, mi, wins


def _sweep_rows(config):
    """Per-row (label, sets, alpha, w, predicted) for both sweep modes."""
    k, q = config.k, config.q
    rows = []
    if config.mode == "heatmap":
        all_blocks = (tuple(range(q)),)
        for s in config.s_grid:
            ev = measurement_bound(s / q, k, q=q, s=s)
            rows.append((s, all_blocks, (s / q,), np.ones(q),
                         (q * ev.m_hat, q * ev.band_low, q * ev.band_high)))
        return "s", rows
    partition = config.partition()
    s_total = sum(partition.support_counts())
    programs = config.programs or ("unit", "optimal")
    for prog in programs:
        if prog == "unit":
            omega = np.ones(partition.L)
            ev = measurement_bound(partition.sigma, k, q=q, s=s_total)
            label = "unit"
        elif prog == "optimal":
            omega = np.array(optimal_weights(partition, k).omega_normalized)
            ev = measurement_bound_weighted(partition.alpha, partition.rho,
                                            k, omega, q=q)
            label = "optimal"
        else:
            omega = np.asarray(prog, dtype=float)
            ev = measurement_bound_weighted(partition.alpha, partition.rho,
                                            k, omega, q=q)
            label = "omega=" + ",".join(format(o, "g") for o in omega)
        rows.append((label, partition.sets, partition.alpha,
                     expand_weights(partition, omega),
                     (q * ev.m_hat, q * ev.band_low, q * ev.band_high)))
    return "program", rows


def run_phase_transition(config):
    """Monte-Carlo success rates over the (row, m) grid, plus predictions."""
    if config.mode not in ("heatmap", "transition-curve"):
        raise ConfigError(f"not a sweep mode: {config.mode}")
    row_name, rows = _sweep_rows(config)
    solver_kwargs = dict(config.solver)
    tasks = []
    for ri, (_, sets, alpha, w, _) in enumerate(rows):
        for mi, m in enumerate(config.m_grid):
            tasks.append((ri, mi, m, config.trials, config.seed, config.n,
                          config.q, config.k, sets, alpha, w, solver_kwargs))
    workers = _worker_count(config)
    if workers <= 1 or len(tasks) <= 1:
        results = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks, chunksize=1))
    successes = np.zeros((len(rows), len(config.m_grid)), dtype=int)
    for ri, mi, wins in results:
        successes[ri, mi] = wins
    return SweepResult(
        mode=config.mode,
        row_name=row_name,
        row_labels=tuple(r[0] for r in rows),
        m_grid=tuple(config.m_grid),
        trials=config.trials,
        successes=successes,
        predicted=tuple(r[4] for r in rows),
        # the timestamp stays out of every emitted file (reproducibility)
        meta={"seed": config.seed, "version": __version__,
              "timestamp": time.time()},
    )


def _first_crossing(m_grid, rates, level=0.5):
    for i, r in enumerate(rates):
        if r >= level:
            if i == 0:
                return float(m_grid[0])
            m0, m1 = m_grid[i - 1], m_grid[i]
            r0, r1 = rates[i - 1], rates[i]
            return m0 + (level - r0) * (m1 - m0) / (r1 - r0)
    return None


def crossing_half(m_grid, rates, trials):
    """50%-success crossing with a binomial 95% confidence interval.

    Returns (m50, m_low, m_high); entries are None when the corresponding
    curve never reaches 50% inside the grid.
    """
    rates = np.asarray(rates, dtype=float)
    se = np.sqrt(rates * (1.0 - rates) / trials)
    upper = np.minimum(rates + 1.96 * se, 1.0)
    lower = np.maximum(rates - 1.96 * se, 0.0)
    return (_first_crossing(m_grid, rates),
            _first_crossing(m_grid, upper),
            _first_crossing(m_grid, lower))


@dataclass
class CurveTable:
    kind: str  # "weights" or "sensitivity"
    alpha_grid: tuple
    k_list: tuple
    values: np.ndarray  # (len(alpha_grid), len(k_list)), NaN on error
    errors: dict        # (i, j) -> message
    flat: np.ndarray = None
    flat_threshold: dict = None
    meta: dict = field(default_factory=dict)


def run_weights_table(alpha_grid, k_list):
    """Optimal weight per (accuracy, block size); errors recorded per cell."""
    values = np.full((len(alpha_grid), len(k_list)), np.nan)
    errors = {}
    for i, a in enumerate(alpha_grid):
        for j, k in enumerate(k_list):
            try:
                values[i, j] = optimal_weight(a, k)
            except DomainError as exc:
                errors[(i, j)] = str(exc)
    return CurveTable(kind="weight", alpha_grid=tuple(alpha_grid),
                      k_list=tuple(k_list), values=values, errors=errors,
                      meta={"version": __version__})


def default_flat_threshold(k):
    """Sensitivity level counted as 'flat': 1.75x the large-accuracy limit.

    The limit as the accuracy approaches 1 is the chi_k mean; the factor
    separates the steep region (accuracy below ~1/10) from the plateau
    for every block size of interest.
    """
    return 1.75 * tail_moment1(0.0, k) / chi_norm_const(k)


def run_sensitivity_table(alpha_grid, k_list, flat_threshold=None):
    """Weight sensitivity per (accuracy, block size), with flat-region flags."""
    values = np.full((len(alpha_grid), len(k_list)), np.nan)
    flat = np.zeros_like(values, dtype=bool)
    errors = {}
    thresholds = {k: (flat_threshold or default_flat_threshold(k)) for k in k_list}
    for i, a in enumerate(alpha_grid):
        for j, k in enumerate(k_list):
            try:
                values[i, j] = weight_sensitivity(a, k)
                flat[i, j] = values[i, j] < thresholds[k]
            except DomainError as exc:
                errors[(i, j)] = str(exc)
    return CurveTable(kind="sensitivity", alpha_grid=tuple(alpha_grid),
                      k_list=tuple(k_list), values=values, errors=errors,
                      flat=flat, flat_threshold=thresholds,
                      meta={"version": __version__})


@dataclass
class BoundsTable:
    q: int
    k: int
    s_grid: tuple
    m_hat: np.ndarray
    t_star: np.ndarray
    band_low: np.ndarray
    meta: dict = field(default_factory=dict)


def run_bounds_table(config):
    """Normalized bound, minimizer and band over the s grid."""
    q, k = config.q, config.k
    m_hat = np.empty(len(config.s_grid))
    t_star = np.empty_like(m_hat)
    band_low = np.empty_like(m_hat)
    for i, s in enumerate(config.s_grid):
        ev = measurement_bound(s / q, k, q=q, s=s)
        m_hat[i], t_star[i], band_low[i] = ev.m_hat, ev.t_star, ev.band_low
    return BoundsTable(q=q, k=k, s_grid=tuple(config.s_grid), m_hat=m_hat,
                       t_star=t_star, band_low=band_low,
                       meta={"version": __version__})


# ---------------------------------------------------------------------------
# emission

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def emit(result, fmt, path=None):
    """Render a result as CSV or SVG; write to path or return the text."""
    if fmt == "csv":
        text = _to_csv(result)
    elif fmt == "svg":
        text = _to_svg(result)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return None


def _to_csv(result):
    if isinstance(result, SweepResult):
        header = [result.row_name, "m", "trials", "successes", "success_rate",
                  "predicted_m", "predicted_low_m", "predicted_high_m"]
        lines = [",".join(header)]
        for ri, label in enumerate(result.row_labels):
            pred, lo, hi = result.predicted[ri]
            for mi, m in enumerate(result.m_grid):
                wins = int(result.successes[ri, mi])
                lines.append(",".join([
                    str(label), str(m), str(result.trials), str(wins),
                    _fmt(wins / result.trials), _fmt(pred), _fmt(lo), _fmt(hi),
                ]))
        return "\n".join(lines) + "\n"
    if isinstance(result, CurveTable):
        header = ["alpha", "k", result.kind]
        if result.kind == "sensitivity":
            header += ["flat", "flat_threshold"]
        header.append("error")
        lines = [",".join(header)]
        for i, a in enumerate(result.alpha_grid):
            for j, k in enumerate(result.k_list):
                cells = [_fmt(a), str(k), _fmt(result.values[i, j])]
                if result.kind == "sensitivity":
                    flat = "" if (i, j) in result.errors else str(int(result.flat[i, j]))
                    cells += [flat, _fmt(result.flat_threshold[k])]
                cells.append(result.errors.get((i, j), ""))
                lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    if isinstance(result, BoundsTable):
        lines = ["s,sigma,m_hat,t_star,predicted_m,predicted_low_m"]
        for i, s in enumerate(result.s_grid):
            lines.append(",".join([
                str(s), _fmt(s / result.q), _fmt(result.m_hat[i]),
                _fmt(result.t_star[i]), _fmt(result.q * result.m_hat[i]),
                _fmt(result.q * result.band_low[i]),
            ]))
        return "\n".join(lines) + "\n"
    raise ConfigError(f"cannot emit {type(result).__name__}")


def load_sweep_csv(path):
    """Parse a sweep CSV back into column arrays (exact float round-trip)."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    header = lines[0].split(",")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        for h, cell in zip(header, ln.split(",")):
            cols[h].append(cell)
    out = {header[0]: cols[header[0]]}
    for h in header[1:]:
        out[h] = np.array([float(c) for c in cols[h]])
    return out


# --- SVG ----------------------------------------------------------------

_PALETTE = ("#000000", "#b03030", "#3060b0", "#308030", "#806000")


def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">')


def _polyline(points, color, dash=None, width=1.5):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{extra} points="{pts}"/>')


def _text(x, y, s, size=11, anchor="middle"):
    return (f'<text x="{x:.2f}" y="{y:.2f}" font-family="monospace" '
            f'font-size="{size}" text-anchor="{anchor}">{s}</text>')


def _to_svg(result):
    if isinstance(result, SweepResult):
        if result.mode == "heatmap":
            return _heatmap_svg(result)
        return _curves_svg(result)
    if isinstance(result, CurveTable):
        return _table_svg(result)
    if isinstance(result, BoundsTable):
        return _bounds_svg(result)
    raise ConfigError(f"cannot render {type(result).__name__}")


def _heatmap_svg(result):
    """Success-rate heatmap (black=0, white=1) with the bound curve overlay."""
    rows = list(result.row_labels)  # s values, on the x axis
    ms = list(result.m_grid)        # on the y axis, increasing upward
    cw, ch = 18, 12
    left, bottom, top, right = 46, 34, 12, 12
    width = left + cw * len(rows) + right
    height = top + ch * len(ms) + bottom
    parts = [_svg_header(width, height)]
    rates = result.rates
    for ri in range(len(rows)):
        for mi in range(len(ms)):
            level = int(round(255 * rates[ri, mi]))
            x = left + ri * cw
            y = top + (len(ms) - 1 - mi) * ch
            parts.append(f'<rect x="{x}" y="{y}" width="{cw}" height="{ch}" '
                         f'fill="#{level:02x}{level:02x}{level:02x}"/>')
    # predicted measurement curve from the bound, in grid coordinates
    m_lo, m_hi = ms[0], ms[-1]

    def y_of(m):
        frac = (m - m_lo) / (m_hi - m_lo) if m_hi > m_lo else 0.5
        return top + (len(ms) - 0.5) * ch - frac * (len(ms) - 1) * ch

    pts = []
    for ri in range(len(rows)):
        pred = result.predicted[ri][0]
        if m_lo <= pred <= m_hi:
            pts.append((left + (ri + 0.5) * cw, y_of(pred)))
    if len(pts) > 1:
        parts.append(_polyline(pts, "#cc2222", width=2.0))
    for ri in range(0, len(rows), max(1, len(rows) // 8)):
        parts.append(_text(left + (ri + 0.5) * cw, height - bottom + 14, str(rows[ri])))
    for mi in range(0, len(ms), max(1, len(ms) // 8)):
        parts.append(_text(left - 6, top + (len(ms) - 1 - mi) * ch + ch, str(ms[mi]),
                           anchor="end"))
    parts.append(_text(left + cw * len(rows) / 2, height - 6, result.row_name))
    parts.append(_text(12, top + ch * len(ms) / 2, "m", anchor="middle"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _chart_frame(width, height, left, bottom, top, right):
    plot_w = width - left - right
    plot_h = height - top - bottom
    frame = (f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
             f'fill="none" stroke="#888888"/>')
    return plot_w, plot_h, frame


def _curves_svg(result):
    ms = list(result.m_grid)
    width, height = 520, 340
    left, bottom, top, right = 50, 40, 16, 12
    plot_w, plot_h, frame = _chart_frame(width, height, left, bottom, top, right)
    m_lo, m_hi = ms[0], ms[-1]

    def xy(m, rate):
        x = left + (m - m_lo) / max(m_hi - m_lo, 1) * plot_w
        y = top + (1.0 - rate) * plot_h
        return x, y

    parts = [_svg_header(width, height), frame]
    parts.append(_polyline([xy(m_lo, 0.5), xy(m_hi, 0.5)], "#bbbbbb", dash="4,4", width=1.0))
    for ri, label in enumerate(result.row_labels):
        color = _PALETTE[ri % len(_PALETTE)]
        pts = [xy(m, r) for m, r in zip(ms, result.rates[ri])]
        parts.append(_polyline(pts, color))
        pred, lo, _ = result.predicted[ri]
        for value, dash in ((pred, None), (lo, "5,3")):
            if m_lo <= value <= m_hi:
                parts.append(_polyline([xy(value, 0.0), xy(value, 1.0)], color,
                                       dash=dash, width=1.0))
        parts.append(_text(left + 8, top + 16 + 14 * ri, str(label), anchor="start"))
    for frac in (0.0, 0.5, 1.0):
        m = m_lo + frac * (m_hi - m_lo)
        tx, ty = xy(m, 0.0)
        parts.append(_text(tx, ty + 16, f"{m:g}"))
        parts.append(_text(left - 8, xy(m_lo, frac)[1] + 4, f"{frac:.1f}", anchor="end"))
    parts.append(_text(left + plot_w / 2, height - 8, "m"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _table_svg(result):
    width, height = 520, 340
    left, bottom, top, right = 56, 40, 16, 12
    plot_w, plot_h, frame = _chart_frame(width, height, left, bottom, top, right)
    alphas = np.asarray(result.alpha_grid)
    logy = result.kind == "sensitivity"
    vals = result.values.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        yv = np.log10(vals) if logy else vals
    finite = np.isfinite(yv)
    if not finite.any():
        return _svg_header(width, height) + "</svg>\n"
    y_min, y_max = float(yv[finite].min()), float(yv[finite].max())
    if y_max == y_min:
        y_max = y_min + 1.0
    a_lo, a_hi = float(alphas.min()), float(alphas.max())

    def xy(a, y):
        x = left + (a - a_lo) / max(a_hi - a_lo, 1e-12) * plot_w
        yy = top + (y_max - y) / (y_max - y_min) * plot_h
        return x, yy

    parts = [_svg_header(width, height), frame]
    for j, k in enumerate(result.k_list):
        color = _PALETTE[j % len(_PALETTE)]
        pts = [xy(a, yv[i, j]) for i, a in enumerate(alphas) if finite[i, j]]
        if len(pts) > 1:
            parts.append(_polyline(pts, color))
        parts.append(_text(left + 8, top + 16 + 14 * j, f"k={k}", anchor="start"))
    for frac in (0.0, 0.5, 1.0):
        a = a_lo + frac * (a_hi - a_lo)
        parts.append(_text(xy(a, y_min)[0], height - bottom + 16, f"{a:.2f}"))
        y = y_min + frac * (y_max - y_min)
        lab = f"1e{y:.1f}" if logy else f"{y:.3g}"
        parts.append(_text(left - 8, xy(a_lo, y)[1] + 4, lab, anchor="end"))
    parts.append(_text(left + plot_w / 2, height - 8, "alpha"))
    ylab = "log10 sensitivity" if logy else "optimal weight"
    parts.append(_text(left + plot_w / 2, 12, ylab))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _bounds_svg(result):
    width, height = 520, 340
    left, bottom, top, right = 56, 40, 16, 12
    plot_w, plot_h, frame = _chart_frame(width, height, left, bottom, top, right)
    s = np.asarray(result.s_grid, dtype=float)
    pred = result.q * result.m_hat
    low = result.q * result.band_low
    y_max = float(pred.max()) or 1.0
    s_lo, s_hi = float(s.min()), float(s.max())

    def xy(sv, yv):
        x = left + (sv - s_lo) / max(s_hi - s_lo, 1e-12) * plot_w
        y = top + (y_max - yv) / y_max * plot_h
        return x, y

    parts = [_svg_header(width, height), frame]
    parts.append(_polyline([xy(a, b) for a, b in zip(s, pred)], "#000000"))
    parts.append(_polyline([xy(a, b) for a, b in zip(s, low)], "#888888", dash="5,3"))
    parts.append(_text(left + plot_w / 2, height - 8, "s"))
    parts.append(_text(left + plot_w / 2, 12, "predicted measurements"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
