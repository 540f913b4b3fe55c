"""Invariant check suite behind the `verify` experiment kind.

Each check reduces to one row (name, statistic, tolerance, pass) with the
uniform convention that the check passes when statistic <= tolerance.
Exact identities carry tolerance 0 or the library's rounding tolerances.
Monte Carlo comparisons are expressed as z-scores: single comparisons get
tolerance 3, while rows that report the worst of m comparisons get the
familywise 3-sigma quantile for m draws (Sidak), which is conservative
when the comparisons correlate positively.  Either way a systematic bias
grows with the path count and blows through the threshold, while honest
sampling noise stays below it at the 3-sigma confidence.

Checks that probe a specific construction (the fractional kernel ladder,
the measurement-error study) fix their own kernels; the generic identity
and moment checks run on the kernel, grid, channel, seed, and path count
from the experiment config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .kernels import (
    BrownianIdentity,
    ExponentialOU,
    RiemannLiouville,
    TimeGrid,
    cell_average_matrix,
    covariance,
    covariance_matrix,
    cross_integral,
    psd_defect,
)
from .mse import _squared_error_stats, filtered_mse_analytic, naive_mse_analytic
from .predict import (
    conditional_covariance,
    conditional_covariance_closed,
    conditional_covariance_matrix,
    conditional_mean,
    conditional_mean_path,
    present_variance,
    rho_to_mix,
)
from .simulate import MixParams, draw_noise, noise_matrix

BATCH_PATHS = 8192

# Exact identities are spot-checked at arbitrary but *fixed* probe points
# (tuples, node pairs, one frozen path) so that their statistics never
# depend on the Monte Carlo seed; only z-score rows respond to it.
POINT_SEED = 1851953191

MC_Z_TOL = 3.0
EXACT_TOL = 0.0
ROUNDING_RTOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.statistic <= self.tolerance


def _rel_diff(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    if scale == 0.0:
        return 0.0
    return abs(x - y) / scale


def _family_z_tol(comparisons: int) -> float:
    """Familywise 3-sigma threshold for the max of several z-scores."""
    if comparisons <= 1:
        return MC_Z_TOL
    single = math.erf(MC_Z_TOL / math.sqrt(2.0))
    return NormalDist().inv_cdf(0.5 * (1.0 + single ** (1.0 / comparisons)))


def _kernel_zoo():
    return [
        BrownianIdentity(),
        RiemannLiouville(0.25),
        RiemannLiouville(0.5),
        RiemannLiouville(0.75),
        ExponentialOU(decay=1.0, scale=1.0),
    ]


# ----------------------------------------------------------------- exact checks


def _check_closed_vs_direct(grid: TimeGrid, tuples: int = 100) -> CheckResult:
    """Direct two-term quadrature against the reduced closed form."""
    rng = np.random.default_rng(POINT_SEED)
    zoo = _kernel_zoo()
    worst = 0.0
    for i in range(tuples):
        kernel = zoo[i % len(zoo)]
        a = float(rng.uniform(-2.0, 2.0))
        b = float(rng.uniform(0.1, 2.0))
        params = MixParams(a=a, b=b)
        it, i_s, iu = (int(v) for v in rng.integers(0, grid.cells + 1, size=3))
        t, s, u = grid.node(it), grid.node(i_s), grid.node(iu)
        direct = conditional_covariance(kernel, params, u, t, s, grid)
        closed = conditional_covariance_closed(kernel, params, u, t, s, grid)
        worst = max(worst, _rel_diff(direct, closed))
    return CheckResult("closed_form_vs_direct_quadrature", worst, ROUNDING_RTOL)


def _check_b_zero_variance(grid: TimeGrid, kernel) -> CheckResult:
    """Noise-free channel: conditional variance collapses to 0 below u."""
    iu = grid.cells // 2
    u = grid.node(iu)
    worst = 0.0
    step = max(1, grid.cells // 16)
    for a in (0.5, 1.0, 3.0):
        params = MixParams(a=a, b=0.0)
        for i in range(step, iu + 1, step):
            t = grid.node(i)
            denom = covariance(kernel, t, t, grid)
            if denom == 0.0:
                continue
            value = conditional_covariance_closed(kernel, params, u, t, t, grid)
            worst = max(worst, abs(value) / denom)
    return CheckResult("b_zero_variance_collapse", worst, ROUNDING_RTOL)


def _check_b_zero_mean(grid: TimeGrid, kernel) -> CheckResult:
    """Noise-free channel: conditional mean equals the plain driver prediction."""
    noise = draw_noise(grid, POINT_SEED, 0)
    iu = grid.cells // 2
    u = grid.node(iu)
    worst = 0.0
    for i in (grid.cells // 4, grid.cells // 2, 3 * grid.cells // 4, grid.cells):
        t = grid.node(i)
        kbar_t = kernel.cell_integrals(t, grid) / grid.delta
        plain = float(np.dot(kbar_t[:iu], noise.driving[:iu]))
        for a in (0.5, 1.0, 3.0):
            mixed = a * noise.driving
            value = conditional_mean(kernel, MixParams(a=a, b=0.0), mixed, u, t, grid)
            worst = max(worst, _rel_diff(value, plain))
    return CheckResult("b_zero_mean_matches_driver_prediction", worst, ROUNDING_RTOL)


def _check_covariance_symmetry(grid: TimeGrid, kernel) -> CheckResult:
    rng = np.random.default_rng(POINT_SEED + 1)
    worst = 0.0
    for _ in range(8):
        it, i_s = (int(v) for v in rng.integers(0, grid.cells + 1, size=2))
        t, s = grid.node(it), grid.node(i_s)
        worst = max(worst, abs(covariance(kernel, t, s, grid) - covariance(kernel, s, t, grid)))
    return CheckResult("covariance_symmetry", worst, EXACT_TOL)


def _check_covariance_psd(grid: TimeGrid, kernel) -> CheckResult:
    return CheckResult("covariance_psd_defect", psd_defect(covariance_matrix(kernel, grid)), PSD_TOL)


def _check_prediction_psd(grid: TimeGrid, kernel, params: MixParams) -> CheckResult:
    u = grid.node(grid.cells // 2)
    cov = conditional_covariance_matrix(kernel, params, u, grid)
    return CheckResult("conditional_covariance_psd_defect", psd_defect(cov), PSD_TOL)


def _check_cross_monotone(grid: TimeGrid, kernel) -> CheckResult:
    """cross_integral must be nondecreasing in u, capping at the covariance."""
    t = grid.node(3 * grid.cells // 4)
    s = grid.node(grid.cells)
    step = max(1, grid.cells // 16)
    values = [cross_integral(kernel, t, s, grid.node(i), grid)
              for i in range(0, grid.cells + 1, step)]
    worst = max((prev - curr for prev, curr in zip(values, values[1:])), default=0.0)
    cap_gap = abs(values[-1] - covariance(kernel, t, s, grid))
    return CheckResult("cross_integral_monotone_in_u", max(worst, cap_gap), EXACT_TOL)


def _check_information_monotone(grid: TimeGrid, kernel, params: MixParams) -> CheckResult:
    """More observation never increases the conditional variance."""
    t = grid.node(3 * grid.cells // 4)
    step = max(1, grid.cells // 16)
    values = [conditional_covariance_closed(kernel, params, grid.node(i), t, t, grid)
              for i in range(0, grid.cells + 1, step)]
    worst = max((curr - prev for prev, curr in zip(values, values[1:])), default=0.0)
    return CheckResult("conditional_variance_monotone_in_u", worst, EXACT_TOL)


def _check_full_information(grid: TimeGrid, kernel, params: MixParams) -> CheckResult:
    """At u = horizon the covariance shrinks by exactly 1 - c everywhere."""
    u = grid.horizon
    shrink = 1.0 - params.signal_fraction
    worst = 0.0
    step = max(1, grid.cells // 8)
    for i in range(0, grid.cells + 1, step):
        for j in range(0, grid.cells + 1, step):
            t, s = grid.node(i), grid.node(j)
            value = conditional_covariance_closed(kernel, params, u, t, s, grid)
            target = shrink * covariance(kernel, t, s, grid)
            worst = max(worst, _rel_diff(value, target))
    return CheckResult("full_information_covariance", worst, ROUNDING_RTOL)


def _check_rl_half_matches_bm(grid: TimeGrid) -> CheckResult:
    rl = RiemannLiouville(0.5)
    bm = BrownianIdentity()
    rng = np.random.default_rng(POINT_SEED + 2)
    worst = 0.0
    for _ in range(8):
        it, i_s, iu = (int(v) for v in rng.integers(0, grid.cells + 1, size=3))
        t, s, u = grid.node(it), grid.node(i_s), grid.node(iu)
        worst = max(worst, _rel_diff(covariance(rl, t, s, grid), covariance(bm, t, s, grid)))
        worst = max(worst, _rel_diff(cross_integral(rl, t, s, u, grid),
                                     cross_integral(bm, t, s, u, grid)))
    return CheckResult("rl_half_matches_bm", worst, ROUNDING_RTOL)


def _quadrature_ladder() -> list[float]:
    """Relative self-covariance error of the H=0.75 kernel as cells double."""
    kernel = RiemannLiouville(0.75)
    exact = 1.0 / (1.5 * math.gamma(1.25) ** 2)
    errors = []
    for cells in (64, 128, 256, 512):
        ladder_grid = TimeGrid(horizon=1.0, cells=cells)
        approx = covariance(kernel, 1.0, 1.0, ladder_grid)
        errors.append(abs(approx - exact) / exact)
    return errors


def _check_ladder_monotone() -> CheckResult:
    errors = _quadrature_ladder()
    worst = max(curr - prev for prev, curr in zip(errors, errors[1:]))
    return CheckResult("quadrature_error_monotone", worst, EXACT_TOL)


def _check_ladder_final() -> CheckResult:
    return CheckResult("quadrature_error_at_512_cells", _quadrature_ladder()[-1], 1e-3)


def _check_present_variance_small_b(grid: TimeGrid, kernel) -> CheckResult:
    """present_variance / b^2 approaches r(u,u) at the 1/(1+b^2) rate."""
    u = grid.horizon
    base = covariance(kernel, u, u, grid)
    worst = 0.0
    for b in (1e-1, 1e-2, 1e-3):
        value = present_variance(kernel, MixParams(a=1.0, b=b), u, grid) / (b * b)
        target = base / (1.0 + b * b)
        worst = max(worst, _rel_diff(value, target))
    return CheckResult("present_variance_small_b_rate", worst, 1e-10)


def _check_degenerate_rejected() -> CheckResult:
    try:
        MixParams(a=0.0, b=0.0)
    except ValueError:
        return CheckResult("degenerate_channel_rejected", 0.0, 0.5)
    return CheckResult("degenerate_channel_rejected", 1.0, 0.5)


def _check_rho_expansion() -> CheckResult:
    params = rho_to_mix(0.6)
    err = abs(params.a - 0.6) + abs(params.b - 0.8)
    return CheckResult("rho_expansion_three_four_five", err, 1e-15)


def _check_rho_zero_mean(grid: TimeGrid, kernel) -> CheckResult:
    params = rho_to_mix(0.0)
    noise = draw_noise(grid, POINT_SEED, 1)
    mixed = params.a * noise.driving + params.b * noise.disturbing
    mean = conditional_mean_path(kernel, params, mixed, grid.horizon, grid)
    return CheckResult("rho_zero_mean_identically_zero", float(np.max(np.abs(mean))), EXACT_TOL)


# ----------------------------------------------------------- Monte Carlo checks


def _check_noise_moments(seed: int, n_paths: int) -> list[CheckResult]:
    """Increment variance and channel independence on a small grid."""
    small = TimeGrid(horizon=1.0, cells=8)
    var_z = 0.0
    sums = np.zeros(3)  # driver*disturbance, driver^2, disturbance^2 at cell 0
    count = 0
    for start in range(0, n_paths, BATCH_PATHS):
        stop = min(start + BATCH_PATHS, n_paths)
        dw = noise_matrix(small, seed, range(start, stop), channel=0)[:, 0]
        dwt = noise_matrix(small, seed, range(start, stop), channel=1)[:, 0]
        sums += (float(np.sum(dw * dwt)), float(np.sum(dw * dw)), float(np.sum(dwt * dwt)))
        count = stop
    for second_moment in sums[1:]:
        variance = second_moment / count
        var_z = max(var_z, abs(variance / small.delta - 1.0) * math.sqrt(count / 2.0))
    corr = sums[0] / math.sqrt(sums[1] * sums[2])
    return [
        CheckResult("noise_increment_variance_z", var_z, _family_z_tol(2)),
        CheckResult("noise_channel_correlation_z", abs(corr) * math.sqrt(count), MC_Z_TOL),
    ]


def _residual_pass(kernel, params: MixParams, u_index: int, t_indices,
                   n_paths: int, seed: int, grid: TimeGrid,
                   orthogonality: bool = False):
    """One batched simulation pass accumulating residual moments.

    Residual = hidden value minus conditional mean given observations up
    to node u_index, at the nodes listed in t_indices.  Optionally also
    accumulates cross moments of the residual against the observed mixed
    Brownian path at every node up to u_index.
    """
    kbar = cell_average_matrix(kernel, grid)
    rows = kbar[list(t_indices)]
    rows_obs = rows[:, :u_index]
    gain = params.gain
    m = rows.shape[0]

    s_eps = np.zeros(m)
    s_cross = np.zeros((m, m))
    s_w = np.zeros(u_index)
    s_w2 = np.zeros(u_index)
    s_ew = np.zeros((m, u_index))

    for start in range(0, n_paths, BATCH_PATHS):
        stop = min(start + BATCH_PATHS, n_paths)
        batch = range(start, stop)
        dw = noise_matrix(grid, seed, batch, channel=0)
        dwt = noise_matrix(grid, seed, batch, channel=1)
        mixed = params.a * dw + params.b * dwt
        eps = dw @ rows.T
        if u_index > 0:
            eps = eps - gain * (mixed[:, :u_index] @ rows_obs.T)
        s_eps += eps.sum(axis=0)
        s_cross += eps.T @ eps
        if orthogonality and u_index > 0:
            w_path = np.cumsum(mixed[:, :u_index], axis=1)
            s_w += w_path.sum(axis=0)
            s_w2 += (w_path * w_path).sum(axis=0)
            s_ew += eps.T @ w_path

    n = n_paths
    cov_eps = (s_cross - np.outer(s_eps, s_eps) / n) / (n - 1)
    result = {"cov": cov_eps}
    if orthogonality and u_index > 0:
        cov_ew = (s_ew - np.outer(s_eps, s_w) / n) / (n - 1)
        sd_eps = np.sqrt(np.diag(cov_eps))
        var_w = (s_w2 - s_w * s_w / n) / (n - 1)
        sd_w = np.sqrt(np.maximum(var_w, 0.0))
        result["orthogonality_z"] = cov_ew / (np.outer(sd_eps, sd_w) / math.sqrt(n))
    return result


def _covariance_z(sample_cov: np.ndarray, target: np.ndarray, n_paths: int) -> float:
    """Largest |z| comparing a sample covariance matrix to its target."""
    diag = np.diag(target)
    spread = np.sqrt((np.outer(diag, diag) + target * target) / n_paths)
    return float(np.max(np.abs(sample_cov - target) / spread))


def _check_residual_covariance(grid: TimeGrid, n_paths: int, seed: int):
    """Residual second moments against the deterministic conditional covariance.

    Runs two kernels by two channels; also reports the present-variance
    cell (t = s = u) from the Brownian/(1, 1) combination.
    """
    u_index = grid.cells // 2
    t_indices = [grid.cells // 4, 3 * grid.cells // 8, grid.cells // 2,
                 3 * grid.cells // 4, grid.cells]
    u = grid.node(u_index)
    worst = 0.0
    present_z = None
    combos = 0
    for kernel in (BrownianIdentity(), RiemannLiouville(0.75)):
        for params in (MixParams(1.0, 1.0), MixParams(0.6, 0.8)):
            combos += 1
            stats = _residual_pass(kernel, params, u_index, t_indices,
                                   n_paths, seed, grid)
            target = conditional_covariance_matrix(kernel, params, u, grid)
            target = target[np.ix_(t_indices, t_indices)]
            worst = max(worst, _covariance_z(stats["cov"], target, n_paths))
            if isinstance(kernel, BrownianIdentity) and params.a == params.b == 1.0:
                slot = t_indices.index(u_index)
                mc_var = stats["cov"][slot, slot]
                analytic = present_variance(kernel, params, u, grid)
                spread = analytic * math.sqrt(2.0 / n_paths)
                present_z = abs(mc_var - analytic) / spread
    m = len(t_indices)
    family = combos * m * (m + 1) // 2
    return [
        CheckResult("residual_covariance_max_z", worst, _family_z_tol(family)),
        CheckResult("present_variance_mc_z", float(present_z), MC_Z_TOL),
    ]


def _check_residual_orthogonality(grid: TimeGrid, n_paths: int, seed: int) -> CheckResult:
    """Residuals must be uncorrelated with the observed path below u."""
    kernel = RiemannLiouville(0.75)
    params = MixParams(1.0, 1.0)
    u_index = grid.cells // 2
    t_indices = [grid.cells // 4, 3 * grid.cells // 4, grid.cells]
    stats = _residual_pass(kernel, params, u_index, t_indices, n_paths, seed,
                           grid, orthogonality=True)
    z = stats["orthogonality_z"]
    return CheckResult("residual_orthogonality_max_z",
                       float(np.max(np.abs(z))), _family_z_tol(z.size))


def _check_unconditional_moments(grid: TimeGrid, kernel, params: MixParams,
                                 n_paths: int, seed: int) -> list[CheckResult]:
    """Path moments with no conditioning: Var/Cov of the hidden process,
    independence of its twin, and the variance of the noisy observation."""
    t_indices = [grid.cells // 4, grid.cells // 2, grid.cells]
    rows = cell_average_matrix(kernel, grid)[t_indices]
    last = rows[-1]
    b = params.b

    m = len(t_indices)
    s_x = np.zeros(m)
    s_xx = np.zeros((m, m))
    s_pair = np.zeros(5)  # x_T, xt_T, x_T^2, xt_T^2, x_T*xt_T
    s_obs = np.zeros(2)  # xb_T, xb_T^2
    for start in range(0, n_paths, BATCH_PATHS):
        stop = min(start + BATCH_PATHS, n_paths)
        batch = range(start, stop)
        dw = noise_matrix(grid, seed, batch, channel=0)
        dwt = noise_matrix(grid, seed, batch, channel=1)
        x = dw @ rows.T
        s_x += x.sum(axis=0)
        s_xx += x.T @ x
        x_t = x[:, -1]
        xt_t = dwt @ last
        xb_t = x_t + b * xt_t
        s_pair += (x_t.sum(), xt_t.sum(), np.dot(x_t, x_t),
                   np.dot(xt_t, xt_t), np.dot(x_t, xt_t))
        s_obs += (xb_t.sum(), np.dot(xb_t, xb_t))

    n = n_paths
    sample_cov = (s_xx - np.outer(s_x, s_x) / n) / (n - 1)
    target = covariance_matrix(kernel, grid)[np.ix_(t_indices, t_indices)]
    moment_z = _covariance_z(sample_cov, target, n)
    moment_family = m * (m + 1) // 2

    cov_xt = (s_pair[4] - s_pair[0] * s_pair[1] / n) / (n - 1)
    var_x = (s_pair[2] - s_pair[0] ** 2 / n) / (n - 1)
    var_xt = (s_pair[3] - s_pair[1] ** 2 / n) / (n - 1)
    twin_z = abs(cov_xt / math.sqrt(var_x * var_xt)) * math.sqrt(n)

    var_obs = (s_obs[1] - s_obs[0] ** 2 / n) / (n - 1)
    target_obs = (1.0 + b * b) * covariance(kernel, grid.horizon, grid.horizon, grid)
    obs_z = abs(var_obs - target_obs) / (target_obs * math.sqrt(2.0 / n))

    return [
        CheckResult("hidden_moments_max_z", moment_z, _family_z_tol(moment_family)),
        CheckResult("hidden_twin_correlation_z", twin_z, MC_Z_TOL),
        CheckResult("observed_variance_inflation_z", obs_z, MC_Z_TOL),
    ]


def _check_mse(grid: TimeGrid, b_values, n_paths: int, seed: int) -> list[CheckResult]:
    """Both measurement-error estimators against their analytic errors."""
    kernel = BrownianIdentity()
    t = grid.horizon
    results = []
    for b in b_values:
        stats = _squared_error_stats(kernel, b, t, n_paths, seed, grid)
        for name, analytic in (("naive", naive_mse_analytic(kernel, b, t, grid)),
                               ("filtered", filtered_mse_analytic(kernel, b, t, grid))):
            mc, se = stats[name]
            z = abs(mc - analytic) / se if se > 0.0 else (0.0 if mc == analytic else math.inf)
            results.append(CheckResult(f"mse_{name}_z[b={b:g}]", z, MC_Z_TOL))
    return results


def run_checks(kernel, grid: TimeGrid, channel: MixParams | None,
               b_values, n_paths: int, seed: int) -> list[CheckResult]:
    """Run the whole suite; deterministic for fixed inputs."""
    params = channel if channel is not None else MixParams(1.0, 1.0)
    checks: list[CheckResult] = []
    checks.append(_check_closed_vs_direct(grid))
    checks.append(_check_b_zero_variance(grid, kernel))
    checks.append(_check_b_zero_mean(grid, kernel))
    checks.append(_check_covariance_symmetry(grid, kernel))
    checks.append(_check_covariance_psd(grid, kernel))
    checks.append(_check_prediction_psd(grid, kernel, params))
    checks.append(_check_cross_monotone(grid, kernel))
    checks.append(_check_information_monotone(grid, kernel, params))
    checks.append(_check_full_information(grid, kernel, params))
    checks.append(_check_rl_half_matches_bm(grid))
    checks.append(_check_ladder_monotone())
    checks.append(_check_ladder_final())
    checks.append(_check_present_variance_small_b(grid, kernel))
    checks.append(_check_degenerate_rejected())
    checks.append(_check_rho_expansion())
    checks.append(_check_rho_zero_mean(grid, kernel))
    checks.extend(_check_noise_moments(seed, n_paths))
    checks.extend(_check_unconditional_moments(grid, kernel, params, n_paths, seed))
    checks.append(_check_residual_orthogonality(grid, n_paths, seed))
    checks.extend(_check_residual_covariance(grid, n_paths, seed))
    checks.extend(_check_mse(grid, b_values, n_paths, seed))
    return checks
