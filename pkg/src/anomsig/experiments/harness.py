"""Study harness: type-1, power, robustness, and oracle-audit runs.

Every study is a pure function of its config and weights: per-trial RNG
streams derive from (master seed, setting index, trial index), rows are
assembled in task order, and CSV text is rendered with shortest-repr
floats, so two runs (serial or pooled) produce identical bytes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable

import numpy as np
from scipy import stats as sstats

from ..anomaly import FilterSpec, detect_region, error_map
from ..covariance import CovarianceModel
from ..diffusion.plan import ReconstructionPlan
from ..diffusion.sampler import reconstruct
from ..errors import AnomsigError, EmptyRegionError
from ..inference.decomposition import TestInstance, decompose
from ..inference.pipeline import run_single_test
from ..inference.search import SearchConfig, parametric_search
from ..pwl.affine import AffineVector
from ..unet.config import UNetConfig, Weights
from ..unet.training import TrainConfig, TrainResult, train
from .families import FAMILY_NAMES, calibrate_family, sample_family
from .signal import place_patch
from ..diffusion.schedule import NoiseSchedule

REPORT_ALPHAS = (0.05, 0.10)
METHOD_COLUMNS = {
    "selective": "p_selective",
    "oc": "p_oc",
    "naive": "p_naive",
    "bonferroni": "p_bonferroni",
}

TRIALS_COLUMNS = [
    "group", "setting", "trial", "region_size", "overlap", "z_obs", "sigma2",
    "n_intervals", "anchors", "zero_width_skips", "p_selective", "p_oc",
    "p_naive", "p_bonferroni", "p_permutation",
]
SUMMARY_COLUMNS = [
    "group", "method", "setting", "alpha", "denominator",
    "rejection_rate", "ci_lo", "ci_hi",
]


@dataclass(frozen=True)
class StudyConfig:
    study: str = "type1"
    n: int = 64
    cov: str = "iid"
    rho: float = 0.5
    lam: float = 0.8
    kernel: int = 3
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    tprime: int = 460
    steps: int = 5
    eta: float = 1.0
    alpha: float = 0.05
    trials: int = 500
    seed: int = 0
    workers: int = 0
    gamma_rel: float = 1e-4
    range_mult: float = 20.0
    permutations: int = 0
    deltas: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0)
    families: tuple[str, ...] = FAMILY_NAMES
    w1_targets: tuple[float, ...] = (0.04,)
    instances: int = 20
    grid_step: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "cov", CovarianceModel(self.cov, 1).kind)
        object.__setattr__(self, "deltas", tuple(self.deltas))
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "w1_targets", tuple(self.w1_targets))

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(sorted({*REPORT_ALPHAS, self.alpha}))

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.T, self.beta_start, self.beta_end)

    def covariance(self) -> CovarianceModel:
        return CovarianceModel(self.cov, self.n, self.rho)

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(self.kernel)

    def search_config(self) -> SearchConfig:
        return SearchConfig(range_mult=self.range_mult, gamma_rel=self.gamma_rel)

    def unet_config(self) -> UNetConfig:
        return UNetConfig(image_side=math.isqrt(self.n))


def clopper_pearson(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for a proportion."""
    if n == 0:
        return 0.0, 1.0
    alpha = 1.0 - conf
    lo = 0.0 if k == 0 else float(sstats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(sstats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def _csv_cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(columns: list[str], rows: Iterable[dict], footer: dict | None = None) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(c)) for c in columns))
    if footer:
        pairs = " ".join(f"{k}={v}" for k, v in footer.items())
        lines.append(f"# {pairs}")
    return "\n".join(lines) + "\n"


@dataclass
class StudyResult:
    config: StudyConfig
    trial_rows: list[dict]
    summary_rows: list[dict]
    requested: int
    completed: int
    excluded_empty: int
    excluded_error: int
    error_messages: list[str] = field(default_factory=list)

    def footer(self) -> dict:
        return {
            "requested": self.requested,
            "completed": self.completed,
            "excluded_empty_region": self.excluded_empty,
            "excluded_error": self.excluded_error,
        }

    def trials_csv_text(self) -> str:
        return render_csv(TRIALS_COLUMNS, self.trial_rows)

    def summary_csv_text(self) -> str:
        return render_csv(SUMMARY_COLUMNS, self.summary_rows, self.footer())

    def config_json_dict(self) -> dict:
        return asdict(self.config)


# ---------------------------------------------------------------------------
# trial execution

_WORKER_STATE: dict = {}


def _build_state(cfg: StudyConfig, weights: Weights) -> dict:
    return {
        "cfg": cfg,
        "predictor": weights.compiled(),
        "schedule": cfg.schedule(),
        "filt": cfg.filter_spec(),
        "search": cfg.search_config(),
        "cov": cfg.covariance(),
        "identity_cov": CovarianceModel("identity", cfg.n),
    }


def _init_worker(weights_doc: dict, cfg_doc: dict) -> None:
    cfg = StudyConfig.from_dict(cfg_doc)
    _WORKER_STATE.clear()
    _WORKER_STATE.update(_build_state(cfg, Weights.from_json_dict(weights_doc)))


def _trial_outcome(state: dict, task: dict):
    """One trial; returns ('ok', row) / ('empty',) / ('error', message)."""
    cfg: StudyConfig = state["cfg"]
    setting_idx = task["setting_idx"]
    trial_idx = task["trial_idx"]
    rng = np.random.default_rng([cfg.seed, setting_idx, trial_idx])

    mode = task["mode"]
    signal_pixels = None
    if mode == "family":
        draws = sample_family(task["family"], task["param"], rng, (2, cfg.n))
        x, x_ref = draws[0], draws[1]
        cov_model = state["identity_cov"]
    else:
        cov_model = state["cov"]
        x = cov_model.sample(rng)
        x_ref = cov_model.sample(rng)
        if mode == "signal" and task["delta"] != 0.0:
            spec = place_patch(cfg.n, task["delta"], rng)
            signal_pixels = spec.pixels
            x = x + spec.mean_vector(cfg.n)

    plan_seed = int(rng.integers(2**63 - 1))
    perm_seed = int(rng.integers(2**63 - 1))
    plan = ReconstructionPlan.create(
        cfg.n, state["schedule"], cfg.tprime, cfg.steps, cfg.eta, plan_seed
    )
    try:
        outcome = run_single_test(
            x,
            x_ref,
            cov_model,
            state["predictor"],
            plan,
            state["filt"],
            cfg.lam,
            state["search"],
            permutations=cfg.permutations,
            permutation_seed=perm_seed,
        )
    except EmptyRegionError:
        return ("empty",)
    except AnomsigError as exc:
        return ("error", f"{type(exc).__name__}: {exc}")

    overlap = ""
    if signal_pixels is not None:
        overlap = int(bool(np.intersect1d(outcome.region, signal_pixels).size))
    elif mode == "signal":
        overlap = 0
    row = {
        "group": task["group"],
        "setting": task["setting"],
        "trial": trial_idx,
        "region_size": len(outcome.region),
        "overlap": overlap,
        "z_obs": outcome.z_obs,
        "sigma2": outcome.sigma2,
        "n_intervals": outcome.counts["intervals"],
        "anchors": outcome.counts["anchors"],
        "zero_width_skips": outcome.counts["zero_width_skips"],
        "p_selective": outcome.p_selective,
        "p_oc": outcome.p_oc,
        "p_naive": outcome.p_naive,
        "p_bonferroni": outcome.p_bonferroni,
        "p_permutation": outcome.p_permutation,
    }
    return ("ok", row)


def _run_trial_pooled(task: dict):
    return task["setting_idx"], task["trial_idx"], _trial_outcome(_WORKER_STATE, task)


def _execute_tasks(
    cfg: StudyConfig, weights: Weights, tasks: list[dict]
) -> list[tuple[int, int, tuple]]:
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(
            max_workers=cfg.workers,
            initializer=_init_worker,
            initargs=(weights.to_json_dict(), asdict(cfg)),
        ) as pool:
            chunk = max(1, len(tasks) // (cfg.workers * 8))
            return list(pool.map(_run_trial_pooled, tasks, chunksize=chunk))
    state = _build_state(cfg, weights)
    return [
        (task["setting_idx"], task["trial_idx"], _trial_outcome(state, task))
        for task in tasks
    ]


def _collect(
    cfg: StudyConfig, weights: Weights, tasks: list[dict]
) -> tuple[list[dict], int, int, list[str]]:
    results = _execute_tasks(cfg, weights, tasks)
    rows: list[dict] = []
    empty = 0
    errors: list[str] = []
    for _, _, outcome in results:
        if outcome[0] == "ok":
            rows.append(outcome[1])
        elif outcome[0] == "empty":
            empty += 1
        else:
            errors.append(outcome[1])
    return rows, empty, len(errors), errors[:20]


def _methods(cfg: StudyConfig) -> dict[str, str]:
    methods = dict(METHOD_COLUMNS)
    if cfg.permutations > 0:
        methods["permutation"] = "p_permutation"
    return methods


def _rate_rows(
    cfg: StudyConfig,
    rows: list[dict],
    group,
    setting,
    denominator: str,
) -> list[dict]:
    out = []
    for method, col in _methods(cfg).items():
        pvals = [r[col] for r in rows if r[col] is not None and r[col] != ""]
        for alpha in cfg.alphas:
            k = sum(1 for p in pvals if p <= alpha)
            n_eff = len(pvals)
            if n_eff:
                rate = k / n_eff
                lo, hi = clopper_pearson(k, n_eff)
            else:
                # empty denominator (e.g. no overlapping detection at this
                # setting): blank cells rather than NaN, which would turn
                # into null anyway on the JSON path
                rate = lo = hi = None
            out.append({
                "group": group,
                "method": method,
                "setting": setting,
                "alpha": alpha,
                "denominator": denominator,
                "rejection_rate": rate,
                "ci_lo": lo,
                "ci_hi": hi,
            })
    return out


def run_type1(cfg: StudyConfig, weights: Weights) -> StudyResult:
    """Null study: both images are noise; tabulate rejection rates."""
    tasks = [
        {
            "setting_idx": 0,
            "trial_idx": i,
            "mode": "null",
            "group": cfg.cov,
            "setting": cfg.n,
        }
        for i in range(cfg.trials)
    ]
    rows, empty, n_err, msgs = _collect(cfg, weights, tasks)
    summary = _rate_rows(cfg, rows, cfg.cov, cfg.n, "detected")
    return StudyResult(
        config=cfg,
        trial_rows=rows,
        summary_rows=summary,
        requested=cfg.trials,
        completed=len(rows),
        excluded_empty=empty,
        excluded_error=n_err,
        error_messages=msgs,
    )


def run_power(cfg: StudyConfig, weights: Weights) -> StudyResult:
    """Planted-signal study; rates conditioned on hitting the signal and not."""
    tasks = []
    for s_idx, delta in enumerate(cfg.deltas):
        for i in range(cfg.trials):
            tasks.append({
                "setting_idx": s_idx,
                "trial_idx": i,
                "mode": "signal",
                "delta": float(delta),
                "group": cfg.cov,
                "setting": delta,
            })
    rows, empty, n_err, msgs = _collect(cfg, weights, tasks)
    summary: list[dict] = []
    for delta in cfg.deltas:
        sub = [r for r in rows if r["setting"] == delta]
        overlap_sub = [r for r in sub if r["overlap"] == 1]
        summary.extend(_rate_rows(cfg, overlap_sub, cfg.cov, delta, "overlap"))
        summary.extend(_rate_rows(cfg, sub, cfg.cov, delta, "all"))
    return StudyResult(
        config=cfg,
        trial_rows=rows,
        summary_rows=summary,
        requested=cfg.trials * len(cfg.deltas),
        completed=len(rows),
        excluded_empty=empty,
        excluded_error=n_err,
        error_messages=msgs,
    )


def run_robustness(cfg: StudyConfig, weights: Weights) -> StudyResult:
    """Type-1 study under calibrated non-Gaussian noise families."""
    settings = []
    for family in cfg.families:
        for d in cfg.w1_targets:
            calibrated = calibrate_family(family, d)
            settings.append((family, d, calibrated.param))
    tasks = []
    for s_idx, (family, d, param) in enumerate(settings):
        for i in range(cfg.trials):
            tasks.append({
                "setting_idx": s_idx,
                "trial_idx": i,
                "mode": "family",
                "family": family,
                "param": param,
                "group": family,
                "setting": d,
            })
    rows, empty, n_err, msgs = _collect(cfg, weights, tasks)
    summary: list[dict] = []
    for family, d, _ in settings:
        sub = [r for r in rows if r["group"] == family and r["setting"] == d]
        summary.extend(_rate_rows(cfg, sub, family, d, "detected"))
    return StudyResult(
        config=cfg,
        trial_rows=rows,
        summary_rows=summary,
        requested=cfg.trials * len(settings),
        completed=len(rows),
        excluded_empty=empty,
        excluded_error=n_err,
        error_messages=msgs,
    )


def train_denoiser(
    cfg: StudyConfig,
    train_cfg: TrainConfig | None = None,
    images: int = 256,
) -> TrainResult:
    """Fit a denoiser on clean noise images drawn from the study covariance."""
    rng = np.random.default_rng([cfg.seed, 104729])
    dataset = cfg.covariance().sample(rng, images)
    tc = train_cfg or TrainConfig(seed=cfg.seed)
    return train(dataset, cfg.unet_config(), cfg.schedule(), tc)


# ---------------------------------------------------------------------------
# oracle audit: parametric truncation vs brute-force grid

ORACLE_COLUMNS = [
    "instance", "attempts", "region_size", "z_obs", "sigma2", "n_intervals",
    "anchors", "n_grid", "n_disagree", "agree_fraction", "max_endpoint_dist",
    "z_obs_in", "eval_max_abs_diff",
]


@dataclass
class OracleCheckResult:
    config: StudyConfig
    rows: list[dict]
    total_grid: int
    total_disagree: int
    all_within_2gamma: bool
    all_z_obs_in: bool
    max_eval_diff: float

    @property
    def agree_fraction(self) -> float:
        if self.total_grid == 0:
            return 1.0
        return 1.0 - self.total_disagree / self.total_grid

    def csv_text(self) -> str:
        footer = {
            "total_grid": self.total_grid,
            "total_disagree": self.total_disagree,
            "agree_fraction": repr(self.agree_fraction),
            "all_within_2gamma": self.all_within_2gamma,
            "all_z_obs_in": self.all_z_obs_in,
            "max_eval_diff": repr(self.max_eval_diff),
        }
        return render_csv(ORACLE_COLUMNS, self.rows, footer)

    def config_json_dict(self) -> dict:
        return asdict(self.config)


def run_oracle_check(cfg: StudyConfig, weights: Weights) -> OracleCheckResult:
    """Audit the parametric truncation against the concrete pipeline.

    Per seeded instance: compare membership in the truncation set against
    region equality recomputed concretely on a fixed z grid, and check the
    affine error line against concrete evaluation at interior points.
    """
    state = _build_state(cfg, weights)
    predictor = state["predictor"]
    schedule = state["schedule"]
    filt = state["filt"]
    cov = state["cov"]
    rows: list[dict] = []
    total_grid = 0
    total_disagree = 0
    all_within = True
    all_in = True
    max_eval_diff = 0.0

    for inst in range(cfg.instances):
        x = x_ref = None
        region = None
        plan = None
        attempts = 0
        for attempt in range(64):
            attempts = attempt + 1
            rng = np.random.default_rng([cfg.seed, inst, attempt, 271828])
            x = cov.sample(rng)
            x_ref = cov.sample(rng)
            plan_seed = int(rng.integers(2**63 - 1))
            plan = ReconstructionPlan.create(
                cfg.n, schedule, cfg.tprime, cfg.steps, cfg.eta, plan_seed
            )
            recon = reconstruct(x, plan, predictor)
            region = detect_region(error_map(x, recon, filt), cfg.lam)
            if not region.is_empty():
                break
        if region is None or region.is_empty():
            raise AnomsigError(
                f"oracle instance {inst}: no nonempty region in 64 attempts"
            )

        instance = TestInstance(x, x_ref, cov)
        decomp = decompose(instance, region)
        search = parametric_search(
            instance, region, decomp, plan, predictor, filt, cfg.lam,
            state["search"],
        )
        trunc = search.truncation
        z_in = trunc.contains(decomp.z_obs)
        all_in = all_in and z_in

        n = cfg.n
        line_x = AffineVector(decomp.a[:n], decomp.b[:n])
        zs = np.arange(search.z_min, search.z_max, cfg.grid_step)
        n_disagree = 0
        max_dist = 0.0
        for z in zs:
            xz = line_x.eval(float(z))
            recon_z = reconstruct(xz, plan, predictor)
            concrete = detect_region(error_map(xz, recon_z, filt), cfg.lam) == region
            if concrete != trunc.contains(float(z)):
                n_disagree += 1
                max_dist = max(max_dist, trunc.nearest_endpoint_distance(float(z)))
        if n_disagree and max_dist > 2.0 * search.gamma:
            all_within = False
        total_grid += len(zs)
        total_disagree += n_disagree

        eval_diff = 0.0
        quantiles = (np.arange(20) + 0.5) / 20.0
        widths = np.array([iv.width for iv in trunc])
        finite = np.isfinite(widths)
        probe_z: list[float] = []
        if finite.any():
            cum = np.cumsum(np.where(finite, widths, 0.0))
            total_w = cum[-1]
            for q in quantiles:
                target = q * total_w
                idx = int(np.searchsorted(cum, target))
                idx = min(idx, len(trunc.intervals) - 1)
                iv = trunc.intervals[idx]
                prev = cum[idx] - (widths[idx] if finite[idx] else 0.0)
                if math.isfinite(iv.lo) and math.isfinite(iv.hi):
                    probe_z.append(iv.lo + (target - prev))
        if not probe_z:
            probe_z = [decomp.z_obs]
        from ..anomaly import error_line

        for z in probe_z:
            err_affine, _ = error_line(line_x, float(z), plan, predictor, filt)
            xz = line_x.eval(float(z))
            err_concrete = error_map(xz, reconstruct(xz, plan, predictor), filt)
            eval_diff = max(
                eval_diff, float(np.max(np.abs(err_affine.eval(float(z)) - err_concrete)))
            )
        max_eval_diff = max(max_eval_diff, eval_diff)

        rows.append({
            "instance": inst,
            "attempts": attempts,
            "region_size": region.size,
            "z_obs": decomp.z_obs,
            "sigma2": decomp.sigma2,
            "n_intervals": len(trunc),
            "anchors": search.anchors,
            "n_grid": len(zs),
            "n_disagree": n_disagree,
            "agree_fraction": 1.0 - (n_disagree / len(zs) if len(zs) else 0.0),
            "max_endpoint_dist": max_dist,
            "z_obs_in": int(z_in),
            "eval_max_abs_diff": eval_diff,
        })

    return OracleCheckResult(
        config=cfg,
        rows=rows,
        total_grid=total_grid,
        total_disagree=total_disagree,
        all_within_2gamma=all_within,
        all_z_obs_in=all_in,
        max_eval_diff=max_eval_diff,
    )
