"""
Scaling experiments: closed-form exponents, R-ladder norm campaigns, log-log
fits and the Strichartz-quotient blow-up report.

Exponents are evaluated in exact rational arithmetic (fractions.Fraction);
decimal inputs are read through their string form, so 1.5 is exactly 3/2.
"""
import json
import os
import time
from dataclasses import dataclass, field, asdict
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import scipy.stats
from scipy.optimize import brentq

import src
from src.analysis.norms import (MixedNormSpec, WeightedProfile, fractional_sobolev, lq_norm, mixed_time_norm,
                                profile_norm)
from src.core.evolve import free_step
from src.core.grids import Grid3D
from src.core.quasimode import GR_TERMS, GridPolicy, QuasimodeSampler, make_cutoffs, sampling_grid
from src.utils.errors import DomainError, LabError, PaddingError, ParameterError, QuadratureError
from src.utils.logger import setup_logger

logger = setup_logger('ScalingLab')

CSV_COLUMNS = ['R', 'norm_fR_Hsigma', 'norm_fR_L2', 'norm_fR_H1', 'norm_WR_mixed', 'norm_FtildeR_dual',
               'quot_epo25', 'quot_epo26', 'quot_epo75', 'valid']
DEFAULT_LADDER = (8, 12, 16, 24, 32, 48, 64)
INF = 'inf'


def as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


def _reciprocal(value):
    """1/value as a Fraction, with 'inf' (or float inf) mapped to 0."""
    if isinstance(value, str):
        if value.strip().lower() not in ('inf', 'infinity'):
            raise ParameterError(f"Exponent must be a number or 'inf', got {value!r}")
        return Fraction(0)
    if isinstance(value, float) and np.isinf(value):
        return Fraction(0)
    value = as_fraction(value)
    if value == 0:
        raise ParameterError("Exponent must be nonzero")
    return 1 / value


@dataclass(frozen=True)
class AdmissiblePair:
    """Wave-admissible (p, q): 2/p + 2/q = 1, 2 < p <= inf, 2 <= q < inf."""
    inv_p: Fraction
    inv_q: Fraction
    excluded: bool = False

    @property
    def p(self):
        return float('inf') if self.inv_p == 0 else float(1 / self.inv_p)

    @property
    def q(self):
        return float(1 / self.inv_q)

    @property
    def sigma(self):
        return self.inv_p - self.inv_q + Fraction(1, 2)

    @property
    def inv_p_dual(self):
        return 1 - self.inv_p

    @property
    def inv_q_dual(self):
        return 1 - self.inv_q

    @property
    def p_dual(self):
        return float(1 / self.inv_p_dual)

    @property
    def q_dual(self):
        return float(1 / self.inv_q_dual)

    def describe(self):
        return {'p': self.p, 'q': self.q, 'sigma': float(self.sigma), 'excluded': self.excluded}


def admissible(p, q):
    """Validate a wave-admissible pair; (inf, 2) is accepted but flagged as excluded."""
    inv_p, inv_q = _reciprocal(p), _reciprocal(q)
    if inv_q == 0:
        raise ParameterError(f"Inadmissible pair ({p}, {q}): q must be finite (2 <= q < inf)")
    if not inv_p < Fraction(1, 2):
        raise ParameterError(f"Inadmissible pair ({p}, {q}): p > 2 is required (2 < p <= inf)")
    if not inv_q <= Fraction(1, 2):
        raise ParameterError(f"Inadmissible pair ({p}, {q}): q >= 2 is required")
    if 2 * inv_p + 2 * inv_q != 1:
        if abs(float(2 * inv_p + 2 * inv_q) - 1.0) > 1e-12:
            raise ParameterError(f"Inadmissible pair ({p}, {q}): wave admissibility 2/p + 2/q = 1 fails "
                                 f"(got {float(2 * inv_p + 2 * inv_q):.6g})")
        inv_q = Fraction(1, 2) - inv_p
    return AdmissiblePair(inv_p, inv_q, excluded=(inv_p == 0 and inv_q == Fraction(1, 2)))


def mu_closed_form(delta, gamma, beta, inv_p):
    """2 (beta - (delta - gamma)) / p + min{gamma - beta, 1 + delta/2 - 2 beta, 2 - delta/2 - beta}."""
    return 2 * (beta - (delta - gamma)) * inv_p + min(gamma - beta, 1 + delta / 2 - 2 * beta,
                                                      2 - delta / 2 - beta)


@dataclass(frozen=True)
class ExponentReport:
    sigma: Fraction
    fR_exp: Fraction
    fR_L2_exp: Fraction
    fR_H1_exp: Fraction
    WR_exp: Fraction
    WR_mixed_exp: Fraction
    FR_exp: Fraction
    penalty: Fraction
    penalty_proof: Fraction
    FR_dual_exp: Fraction
    FR_dual_exp_proof: Fraction
    rest_exp: Fraction
    ratio25_exp: Fraction
    kappa: Fraction
    mu: Fraction
    quot75_exp: Fraction
    beta_threshold: Fraction
    gamma_window: tuple
    beta_max: Optional[float]
    excluded_pair: bool

    @property
    def mu_positive(self):
        return self.mu > 0

    @property
    def above_threshold(self):
        return self.ratio25_exp > 0

    def dual_base(self):
        return self.FR_dual_exp - self.penalty

    def as_floats(self):
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, Fraction):
                out[key] = float(value)
            elif isinstance(value, tuple):
                out[key] = [float(v) for v in value]
            else:
                out[key] = value
        out['mu_positive'] = self.mu_positive
        return out


def _beta_max(delta, gamma, inv_p):
    """Largest beta with mu > 0 (mu is strictly decreasing in beta); None if mu <= 0 at the threshold."""
    threshold = float(delta - gamma)
    mu = lambda b: float(mu_closed_form(float(delta), float(gamma), b, float(inv_p)))
    if mu(threshold) <= 0:
        return None
    upper = threshold + 1.0
    while mu(upper) > 0:
        upper += 1.0
    return float(brentq(mu, threshold, upper, xtol=1e-14))


def exponents_from_values(delta, gamma, beta, pair):
    delta, gamma, beta = as_fraction(delta), as_fraction(gamma), as_fraction(beta)
    sigma = pair.sigma
    inv_p, inv_q = pair.inv_p, pair.inv_q
    inv_pd, inv_qd = pair.inv_p_dual, pair.inv_q_dual

    fR_exp = (delta + gamma) / 2 - sigma * gamma
    WR_exp = (delta + gamma) * inv_q
    WR_mixed = beta * inv_p + WR_exp
    FR_exp = (delta + gamma) * inv_q - 2 * sigma * gamma
    penalty = max(-gamma, beta - 1 - delta / 2, -(2 - delta / 2))
    penalty_proof = max(Fraction(-1), beta - 1 - delta / 2)
    dual_base = beta * inv_pd + (delta + gamma) * inv_qd - 2 * sigma * gamma
    FR_dual = dual_base + penalty
    rest = dual_base - 1
    kappa = WR_mixed - FR_dual
    mu = mu_closed_form(delta, gamma, beta, inv_p)
    quot75 = WR_mixed - max(fR_exp, FR_dual, rest)
    return ExponentReport(
        sigma=sigma, fR_exp=fR_exp, fR_L2_exp=(delta + gamma) / 2, fR_H1_exp=(delta + gamma) / 2 - gamma,
        WR_exp=WR_exp, WR_mixed_exp=WR_mixed, FR_exp=FR_exp, penalty=penalty, penalty_proof=penalty_proof,
        FR_dual_exp=FR_dual, FR_dual_exp_proof=dual_base + penalty_proof, rest_exp=rest,
        ratio25_exp=(beta - (delta - gamma)) * inv_p, kappa=kappa, mu=mu, quot75_exp=quot75,
        beta_threshold=delta - gamma, gamma_window=(delta / 2, Fraction(1)),
        beta_max=_beta_max(delta, gamma, inv_p), excluded_pair=pair.excluded)


def exponents(params, pair):
    return exponents_from_values(params.delta, params.gamma, params.beta, pair)


@dataclass
class LadderSettings:
    padding: float = 2.0
    quadrature_rtol: float = 1e-4
    quadrature_max_nodes: int = 64
    term_diagnostics: bool = True
    profile_diagnostics: bool = True
    refine: float = 1.0


@dataclass
class NormLadderReport:
    rows: pd.DataFrame
    diagnostics: pd.DataFrame
    manifest: Dict
    warnings: List[str] = field(default_factory=list)

    def valid_rows(self):
        return self.rows[self.rows['valid']]

    def column(self, name):
        """(R, values) over valid rows, looked up in the main table or the diagnostics."""
        valid = self.valid_rows()
        if name in valid.columns:
            return valid['R'].to_numpy(float), valid[name].to_numpy(float)
        merged = valid[['R']].merge(self.diagnostics, on='R', how='left')
        if name not in merged.columns:
            raise ParameterError(f"Unknown ladder column '{name}'")
        return merged['R'].to_numpy(float), merged[name].to_numpy(float)


def _row_norms(params, pair, policy, settings):
    """All norms of one ladder row; raises LabError subclasses on unresolved grids."""
    grid = sampling_grid(params, policy, settings.refine)
    sampler = QuasimodeSampler.on_grid(params, make_cutoffs(), grid)
    horizon = params.time_horizon
    sigma = float(pair.sigma)
    fR = sampler.field(sampler.fR(), 0.0, 'f_R')
    rtol, max_nodes, padding = settings.quadrature_rtol, settings.quadrature_max_nodes, settings.padding

    row = {
        'R': float(params.R),
        'norm_fR_Hsigma': fractional_sobolev(fR, sigma, 2, padding),
        'norm_fR_L2': lq_norm(fR, 2),
        'norm_fR_H1': fractional_sobolev(fR, 1.0, 2, padding),
    }
    mixed = MixedNormSpec(pair.p, pair.q, 0.0, horizon)
    dual = MixedNormSpec(pair.p_dual, pair.q_dual, 2.0 * sigma, horizon)
    row['norm_WR_mixed'] = mixed_time_norm(lambda t: sampler.field(sampler.WR(t), t, 'W_R'), mixed,
                                           rtol, max_nodes, padding)
    row['norm_FtildeR_dual'] = mixed_time_norm(lambda t: sampler.field(sampler.F_tilde(t), t, 'F_tilde_R'),
                                               dual, rtol, max_nodes, padding)
    norm_FR_dual = mixed_time_norm(lambda t: sampler.field(sampler.FR(t), t, 'F_R'), dual,
                                   rtol, max_nodes, padding)
    row['quot_epo25'] = row['norm_WR_mixed'] / row['norm_fR_Hsigma']
    row['quot_epo26'] = row['norm_WR_mixed'] / norm_FR_dual
    row['quot_epo75'] = row['norm_WR_mixed'] / (row['norm_fR_Hsigma'] + row['norm_FtildeR_dual'])

    diag = {'R': float(params.R), 'norm_FR_dual': norm_FR_dual, 'norm_WR0_Lq': lq_norm(fR, pair.q),
            'grid_shape': 'x'.join(str(n) for n in grid.shape), 'grid_spacing': max(grid.spacing)}
    if settings.term_diagnostics:
        diag['norm_term_F'] = mixed_time_norm(lambda t: sampler.field(sampler.F_term(t), t, 'F_term'),
                                              dual, rtol, max_nodes, padding)
        for name in GR_TERMS:
            diag[f'norm_term_{name}'] = mixed_time_norm(
                lambda t, n=name: sampler.field(sampler.GR_terms(t)[n], t, n), dual, rtol, max_nodes, padding)
    if settings.profile_diagnostics:
        cutoffs = make_cutoffs()
        q = pair.q
        diag['profile_w0'] = profile_norm(WeightedProfile(0.0), params, cutoffs, q)
        diag['profile_w0_psiR_prime'] = profile_norm(WeightedProfile(0.0), params, cutoffs, q, ('psi_R',))
        diag['profile_w1'] = profile_norm(WeightedProfile(1.0), params, cutoffs, q)
        diag['profile_w2'] = profile_norm(WeightedProfile(2.0), params, cutoffs, q)
        diag['profile_gradient_a'] = profile_norm(WeightedProfile.gradient_profile(params.delta, params.gamma),
                                                  params, cutoffs, q)
    return row, diag, grid


def run_ladder(params_template, R_list, pair, policy=GridPolicy(), settings=LadderSettings(), config_hash=''):
    """
    One row of norms per R. Rows whose grids fail to resolve (padding or
    quadrature failures) are kept as invalid rows and the campaign continues.
    """
    if pair.excluded:
        raise ParameterError("The pair (inf, 2) is excluded from counterexample runs")
    started = time.time()
    warnings = []
    if not params_template.above_threshold:
        message = (f"beta={params_template.beta} does not exceed delta - gamma = "
                   f"{params_template.delta - params_template.gamma:.6g}; blow-up precondition violated")
        logger.warning(message)
        warnings.append(message)

    rows, diagnostics, grids = [], [], {}
    for R in sorted(float(r) for r in R_list):
        params = params_template.with_R(R)
        logger.debug(f"Ladder row R={R}")
        try:
            row, diag, grid = _row_norms(params, pair, policy, settings)
            values = [row[c] for c in CSV_COLUMNS if c not in ('R', 'valid')]
            if not all(np.isfinite(values)) or min(values) <= 0:
                raise DomainError(f"non-finite or non-positive norm at R={R}: {values}")
            row['valid'] = True
            grids[str(R)] = grid.describe()
            logger.info(f"Successfully computed ladder row R={R}: quot_epo75={row['quot_epo75']:.6e}")
        except (PaddingError, QuadratureError, DomainError) as e:
            logger.error(f"Failed to compute ladder row R={R}: {e}")
            warnings.append(f"R={R}: {e}")
            row = {c: float('nan') for c in CSV_COLUMNS}
            row['R'], row['valid'] = R, False
            diag = {'R': R, 'error': str(e)}
        rows.append(row)
        diagnostics.append(diag)

    table = pd.DataFrame(rows, columns=CSV_COLUMNS).sort_values('R').reset_index(drop=True)
    table['valid'] = table['valid'].astype(bool)
    manifest = {
        'params': params_template.describe(),
        'pair': pair.describe(),
        'R_list': [float(r) for r in sorted(R_list)],
        'grids': grids,
        'grid_policy': asdict(policy),
        'settings': asdict(settings),
        'software_version': src.__version__,
        'wall_clock_seconds': round(time.time() - started, 3),
        'config_hash': config_hash,
        'warnings': warnings,
    }
    return NormLadderReport(table, pd.DataFrame(diagnostics), manifest, warnings)


@dataclass
class ScalingFit:
    column: str
    slope: float
    intercept: float
    residual: float
    r_squared: float
    predicted: float
    tolerance: float
    kind: str
    verdict: bool
    points: int

    def describe(self):
        return asdict(self)


FIT_KINDS = ('two_sided', 'lower', 'upper')


def fit_power_law(R, values, column, predicted, tol, kind='two_sided'):
    """Least squares of log(value) against log(R); verdict per kind."""
    if kind not in FIT_KINDS:
        raise ParameterError(f"Unknown fit kind '{kind}', expected one of {FIT_KINDS}")
    R = np.asarray(R, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0)
    R, values = R[keep], values[keep]
    if R.size < 3:
        raise ParameterError(f"Fit of '{column}' needs at least 3 valid rows, got {R.size}")
    x, y = np.log(R), np.log(values)
    result = scipy.stats.linregress(x, y)
    residual = float(np.sqrt(np.mean((y - (result.intercept + result.slope * x)) ** 2)))
    slope, predicted = float(result.slope), float(predicted)
    if kind == 'two_sided':
        verdict = abs(slope - predicted) <= tol
    elif kind == 'lower':
        verdict = slope >= predicted - tol
    else:
        verdict = slope <= predicted + tol
    return ScalingFit(column, slope, float(result.intercept), residual, float(result.rvalue ** 2), predicted,
                      float(tol), kind, bool(verdict), int(R.size))


def fit(report, column, predicted, tol, kind='two_sided'):
    R, values = report.column(column)
    return fit_power_law(R, values, column, predicted, tol, kind)


def ratio_spread(R, values, exponent):
    """max/min of value / R^exponent, the two-sided bounded-ratio check."""
    normalized = np.asarray(values, dtype=float) / np.asarray(R, dtype=float) ** float(exponent)
    return float(normalized.max() / normalized.min())


def profile_ratio_check(report, expo, bound=3.0, column='profile_w0'):
    """Bounded-ratio check of the unweighted profile norm against R^{(delta+gamma)/q}."""
    R, values = report.column(column)
    keep = np.isfinite(values) & (values > 0)
    if keep.sum() < 2:
        raise ParameterError(f"Ratio check of '{column}' needs at least 2 valid rows")
    spread = ratio_spread(R[keep], values[keep], expo.WR_exp)
    return {'column': column, 'exponent': float(expo.WR_exp), 'spread': spread, 'bound': float(bound),
            'verdict': bool(spread < bound)}


@dataclass
class FitPlan:
    column: str
    predicted: float
    tol: float
    kind: str
    required: bool = True


def standard_fit_plan(expo, params, slope_tol, slack):
    """Required slopes plus term-wise diagnostic fits of the dual source norms."""
    base = float(expo.dual_base())
    delta, gamma = float(params.delta), float(params.gamma)
    plan = [
        FitPlan('norm_fR_Hsigma', float(expo.fR_exp), slope_tol, 'two_sided'),
        FitPlan('norm_fR_L2', float(expo.fR_L2_exp), slope_tol, 'two_sided'),
        FitPlan('norm_fR_H1', float(expo.fR_H1_exp), slope_tol, 'two_sided'),
        FitPlan('norm_WR0_Lq', float(expo.WR_exp), slope_tol, 'two_sided'),
        FitPlan('quot_epo25', float(expo.ratio25_exp), slack, 'lower'),
        FitPlan('norm_FtildeR_dual', float(expo.FR_dual_exp), slope_tol, 'upper', required=False),
        FitPlan('norm_term_F', float(expo.FR_dual_exp), slope_tol, 'two_sided', required=False),
        FitPlan('norm_term_F', float(expo.FR_dual_exp_proof), slope_tol, 'two_sided', required=False),
    ]
    offsets = {
        'transverse': -(2.0 - delta / 2.0),
        'psi_R_prime': -gamma,
        'rho_psi_prime': -(3.0 - delta),
        'rho_chi_prime': -(3.0 - delta),
    }
    for name, offset in offsets.items():
        plan.append(FitPlan(f'norm_term_{name}', base + offset, slope_tol, 'two_sided', required=False))
    return plan


def run_fits(report, plan):
    """Apply every planned fit that has enough data; returns a list of (FitPlan, ScalingFit)."""
    results = []
    for item in plan:
        try:
            results.append((item, fit(report, item.column, item.predicted, item.tol, item.kind)))
        except ParameterError as e:
            logger.warning(f"Skipping fit of '{item.column}': {e}")
    return results


def fits_frame(results):
    records = []
    for item, result in results:
        record = result.describe()
        record['required'] = item.required
        records.append(record)
    return pd.DataFrame(records)


@dataclass
class BlowUpSummary:
    verdict: str
    mu: float
    mu_positive: bool
    R: List[float]
    quotients: List[float]
    tail_increasing: bool
    growth: Optional[ScalingFit]
    free_ratio: Optional[float] = None
    free_bounded: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == 'blow_up' and self.free_bounded is not False

    def describe(self):
        out = asdict(self)
        out['growth'] = None if self.growth is None else self.growth.describe()
        return out


def blow_up_report(report, expo, tail=4, free_quotients=None, free_ratio_bound=3.0, growth_tol=0.15):
    """
    Verdict on the quot_epo75 sequence: 'no_certificate' when mu <= 0,
    'blow_up' when the last `tail` quotients increase strictly, else 'no_blow_up'.
    """
    R, quotients = report.column('quot_epo75')
    notes = list(report.warnings)
    tail_values = quotients[-tail:]
    increasing = len(tail_values) >= 2 and bool(np.all(np.diff(tail_values) > 0))
    if len(tail_values) < tail:
        notes.append(f"Only {len(tail_values)} valid rows for a tail of {tail}")
        increasing = False
    growth = None
    if len(quotients) >= 3:
        growth = fit_power_law(R, quotients, 'quot_epo75', float(expo.quot75_exp), growth_tol, 'lower')

    free_ratio = free_bounded = None
    if free_quotients is not None and len(free_quotients) > 0:
        values = np.asarray(free_quotients, dtype=float)
        free_ratio = float(values.max() / values.min())
        free_bounded = free_ratio < free_ratio_bound

    if not expo.mu_positive:
        verdict = 'no_certificate'
        notes.append(f"mu = {float(expo.mu):.6g} <= 0: no blow-up certificate")
    elif increasing:
        verdict = 'blow_up'
    else:
        verdict = 'no_blow_up'
    logger.info(f"Blow-up verdict: {verdict} (mu={float(expo.mu):.6g}, tail increasing={increasing})")
    return BlowUpSummary(verdict, float(expo.mu), expo.mu_positive, [float(r) for r in R],
                         [float(v) for v in quotients], increasing, growth, free_ratio, free_bounded, notes)


def free_flow_grid(params, policy):
    """Sampling box widened by the travel distance R^beta on every side."""
    base = sampling_grid(params, policy)
    horizon = params.time_horizon
    lower = [o - horizon for o in base.origin]
    upper = [u + horizon for u in base.upper]
    return Grid3D.from_bounds(lower, upper, max(base.spacing), policy.max_points)


def free_control_quotients(params_template, R_list, pair, policy=GridPolicy(), settings=LadderSettings()):
    """||exp(itD) f_R||_{L^p((0,R^beta); L^q)} / ||f_R||_{H^sigma} under the exact free propagator."""
    records = []
    sigma = float(pair.sigma)
    for R in sorted(float(r) for r in R_list):
        params = params_template.with_R(R)
        grid = free_flow_grid(params, policy)
        sampler = QuasimodeSampler.on_grid(params, make_cutoffs(), grid)
        f = sampler.field(sampler.fR(), 0.0, 'f_R')
        try:
            spec = MixedNormSpec(pair.p, pair.q, 0.0, params.time_horizon)
            flow = mixed_time_norm(lambda t: free_step(f, t), spec, settings.quadrature_rtol,
                                   settings.quadrature_max_nodes, settings.padding)
            data_norm = fractional_sobolev(f, sigma, 2, settings.padding)
            records.append({'R': R, 'norm_free_mixed': flow, 'norm_fR_Hsigma': data_norm,
                            'quot_free': flow / data_norm, 'valid': True})
        except LabError as e:
            logger.error(f"Failed to compute free control at R={R}: {e}")
            records.append({'R': R, 'norm_free_mixed': float('nan'), 'norm_fR_Hsigma': float('nan'),
                            'quot_free': float('nan'), 'valid': False})
    return pd.DataFrame(records)


def refinement_check(params, pair, policy=GridPolicy(), settings=LadderSettings(), factor=2.0):
    """Relative change of the f_R and W_R norms when the grid spacing is divided by `factor`."""
    coarse_settings = LadderSettings(settings.padding, settings.quadrature_rtol, settings.quadrature_max_nodes,
                                     False, False, 1.0)
    fine_settings = LadderSettings(settings.padding, settings.quadrature_rtol, settings.quadrature_max_nodes,
                                   False, False, factor)
    coarse, _, _ = _row_norms(params, pair, policy, coarse_settings)
    fine, _, _ = _row_norms(params, pair, policy, fine_settings)
    changes = {key: abs(fine[key] - coarse[key]) / abs(fine[key]) for key in coarse if key != 'R'}
    logger.info(f"Refinement check at R={params.R}: max relative change {max(changes.values()):.3e}")
    return changes


def write_ladder_csv(report, path, config_hash):
    """CSV with a '# config_hash=...' first line; deterministic float formatting."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as handle:
        handle.write(f'# config_hash={config_hash}\n')
        report.rows.to_csv(handle, index=False, float_format='%.12e')


def write_frame_csv(frame, path, config_hash):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as handle:
        handle.write(f'# config_hash={config_hash}\n')
        frame.to_csv(handle, index=False, float_format='%.12e')


def write_manifest(path, manifest):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w') as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=str)


def write_plot_data(x, values, path, config_hash, label, log=True, x_label='R'):
    """Two whitespace-separated columns for one quantity, (log x, log value) by default."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if log:
        keep = np.isfinite(values) & (values > 0)
        data = np.column_stack([np.log(x[keep]), np.log(values[keep])])
        names = f'log_{x_label} log_{label}'
    else:
        data = np.column_stack([x, values])
        names = f'{x_label} {label}'
    np.savetxt(path, data, fmt='%.12e', header=f'config_hash={config_hash}\n{names}')
