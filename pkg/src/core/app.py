import json
import os
import time

import numpy as np
import pandas as pd

import src
from src.analysis.scaling_lab import (LadderSettings, admissible, blow_up_report, exponents,
                                      exponents_from_values, fits_frame, free_control_quotients,
                                      profile_ratio_check, refinement_check, run_fits, run_ladder,
                                      standard_fit_plan, write_frame_csv, write_ladder_csv, write_manifest,
                                      write_plot_data)
from src.core.evolve import persistence_experiment
from src.core.grids import GridSpec2D
from src.core.landau_eigen import extrapolated_oracle_level, landau_ladder, load_or_solve_modes, select_mode
from src.core.quasimode import ConstructionParams, GridPolicy, make_cutoffs
from src.core.run_archive import LabArchive
from src.utils.errors import (ArchiveError, BoxTruncationError, ConfigError, DomainError, EigenSolveError, LabError,
                              PaddingError, ParameterError, QuadratureError)
from src.utils.field_io import write_spinor_field
from src.utils.logger import setup_logger

logger = setup_logger('LabApp')

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_NO_CERTIFICATE = 4

NUMERICAL_ERRORS = (EigenSolveError, QuadratureError, PaddingError, BoxTruncationError)


def exit_code_for(error):
    """Exit status for an exception escaping a command."""
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    if isinstance(error, (ConfigError, ParameterError, DomainError, ArchiveError)):
        return EXIT_USAGE
    return EXIT_VERDICT


def format_exponents(report, pair, delta, gamma, beta):
    """Human-readable exponent table for the `exponents` command."""
    values = report.as_floats()
    lines = [
        f"pair (p, q) = ({pair.p:g}, {pair.q:g}), sigma = {values['sigma']:g}",
        f"delta = {delta:g}, gamma = {gamma:g}, beta = {beta:g}",
        f"beta threshold (delta - gamma) = {values['beta_threshold']:g}"
        f"  [{'above' if report.above_threshold else 'NOT above'}]",
        f"gamma window (delta/2, 1) = ({values['gamma_window'][0]:g}, {values['gamma_window'][1]:g})",
    ]
    for key in ('fR_exp', 'fR_L2_exp', 'fR_H1_exp', 'WR_exp', 'WR_mixed_exp', 'FR_exp', 'penalty',
                'penalty_proof', 'FR_dual_exp', 'FR_dual_exp_proof', 'rest_exp', 'ratio25_exp', 'kappa',
                'quot75_exp'):
        lines.append(f"  {key:<18} = {values[key]:.6g}  ({getattr(report, key)})")
    lines.append(f"mu = {values['mu']:.6g} ({report.mu})  [{'positive' if report.mu_positive else 'NOT positive'}]")
    beta_max = values['beta_max']
    lines.append(f"beta_max = {'none' if beta_max is None else f'{beta_max:.8g}'}")
    if report.excluded_pair:
        lines.append("note: (inf, 2) is the excluded endpoint")
    return '\n'.join(lines)


class LabApp:
    """Command orchestrator: one instance per CLI invocation."""

    def __init__(self, config, seed=0):
        self.config = config
        self.config_hash = config.hash
        self.seed = seed
        self.out_dir = config.output.directory
        self._modes = None
        self.modes_reused = False
        self._archive = None

    @property
    def archive(self):
        if self._archive is None:
            self._archive = LabArchive.in_directory(self.out_dir)
        return self._archive

    def _path(self, *parts):
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def eigen_grid(self):
        return GridSpec2D(self.config.eigen.L, self.config.eigen.N)

    def modes(self):
        if self._modes is None:
            eigen, tol = self.config.eigen, self.config.tolerance
            self._modes, self.modes_reused = load_or_solve_modes(
                self.eigen_grid(), os.path.join(self.out_dir, 'modes'), eigen.count, tol.eigen_residual,
                eigen.sector, eigen.sector_penalty, eigen.maxiter, tol.boundary_decay, self.config_hash)
        return self._modes

    def construction_params(self, R=None):
        c = self.config.construction
        mode = select_mode(self.modes(), c.mode_index)
        logger.debug(f"Using mode lambda={mode.lam:.10f} (index {c.mode_index})")
        return ConstructionParams(c.delta, c.gamma, c.beta, c.R if R is None else R, mode,
                                  oversample=self.config.eigen.oversample)

    def pair(self):
        return admissible(self.config.pair.p, self.config.pair.q)

    def policy(self):
        return GridPolicy.from_config(self.config.grid)

    def ladder_settings(self, term_diagnostics=True):
        tol = self.config.tolerance
        return LadderSettings(self.config.grid.padding, tol.quadrature_rtol, tol.quadrature_max_nodes,
                              term_diagnostics, True)

    def _base_manifest(self, command, started):
        return {
            'command': command,
            'config': self.config.to_dict(),
            'config_hash': self.config_hash,
            'software_version': src.__version__,
            'seed': self.seed,
            'wall_clock_seconds': round(time.time() - started, 3),
        }

    def cmd_eigen(self, oracle=False):
        """Solve (or reuse) the mode cache and write the eigenvalue summary table."""
        started = time.time()
        modes = self.modes()
        ladder = landau_ladder(len(modes))
        rows = []
        for position, mode in enumerate(modes):
            level = int(np.argmin([abs(abs(mode.lam) - r) for r in ladder]))
            rows.append({'index': position, **mode.summary(), 'landau_level': level,
                         'landau_reference': float(np.sign(mode.lam) * ladder[level])})
        table = pd.DataFrame(rows)
        print(table.to_string(index=False, float_format=lambda v: f'{v:.10g}'))
        write_frame_csv(table, self._path('eigen', 'eigen_summary.csv'), self.config_hash)

        manifest = self._base_manifest('eigen', started)
        manifest['cache_reused'] = bool(self.modes_reused)
        if oracle:
            eigen = self.config.eigen
            extrapolated, levels = extrapolated_oracle_level(eigen.L, sector=eigen.sector,
                                                             penalty=eigen.sector_penalty)
            smallest = min(m.lam for m in modes if m.lam > 1e-6)
            manifest['oracle'] = {'extrapolated': extrapolated, 'levels_N32_N48': levels,
                                  'relative_difference': abs(smallest - extrapolated) / extrapolated}
            print(f"oracle: extrapolated smallest positive level {extrapolated:.8f}, "
                  f"spectral {smallest:.8f}, relative difference {manifest['oracle']['relative_difference']:.2e}")
        write_manifest(self._path('eigen', 'manifest.json'), manifest)
        self.archive.add_run('eigen', manifest, {'eigen_summary': table}, verdict='solved', exit_code=EXIT_OK)
        logger.info(f"Successfully completed eigen command with {len(modes)} modes")
        return EXIT_OK

    def cmd_scaling(self, free_control=True, refine=False, term_diagnostics=True):
        """R-ladder campaign, fits, blow-up verdict and free-flow control."""
        started = time.time()
        c, tol = self.config.construction, self.config.tolerance
        params = self.construction_params()
        pair = self.pair()
        expo = exponents(params, pair)
        policy, settings = self.policy(), self.ladder_settings(term_diagnostics)

        report = run_ladder(params, c.R_list, pair, policy, settings, self.config_hash)
        write_ladder_csv(report, self._path('scaling', 'ladder.csv'), self.config_hash)
        write_frame_csv(report.diagnostics, self._path('scaling', 'ladder_diagnostics.csv'), self.config_hash)

        results = run_fits(report, standard_fit_plan(expo, params, tol.slope, tol.slope_slack))
        fits = fits_frame(results)
        write_frame_csv(fits, self._path('scaling', 'fits.csv'), self.config_hash)
        for item, result in results:
            R, values = report.column(item.column)
            write_plot_data(R, values, self._path('scaling', f'plot_{item.column}.dat'), self.config_hash,
                            item.column)

        free = None
        free_values = None
        if free_control:
            free = free_control_quotients(params, c.R_list, pair, policy, settings)
            write_frame_csv(free, self._path('scaling', 'free_control.csv'), self.config_hash)
            free_values = free.loc[free['valid'], 'quot_free'].to_numpy(float)
        summary = blow_up_report(report, expo, tol.blowup_tail, free_values, tol.free_control_ratio, tol.slope)

        missing_required = [item.column for item in standard_fit_plan(expo, params, tol.slope, tol.slope_slack)
                            if item.required and item.column not in {i.column for i, _ in results}]
        failed_required = [f"{item.column} (slope {result.slope:.4f}, predicted {result.predicted:.4f})"
                           for item, result in results if item.required and not result.verdict]
        try:
            profile_check = profile_ratio_check(report, expo, tol.free_control_ratio)
        except ParameterError as e:
            profile_check = {'verdict': False, 'error': str(e)}

        refinement = None
        if refine:
            refinement = refinement_check(params.with_R(min(c.R_list)), pair, policy, settings)

        manifest = self._base_manifest('scaling', started)
        manifest.update({'ladder': report.manifest, 'exponents': expo.as_floats(), 'blow_up': summary.describe(),
                         'profile_ratio': profile_check, 'missing_required_fits': missing_required,
                         'failed_required_fits': failed_required, 'refinement': refinement})

        if not expo.mu_positive:
            code = EXIT_NO_CERTIFICATE
        elif missing_required or failed_required or not profile_check['verdict'] or not summary.passed:
            code = EXIT_VERDICT
        else:
            code = EXIT_OK
        manifest['exit_code'] = code
        write_manifest(self._path('scaling', 'manifest.json'), manifest)

        tables = {'ladder': report.rows, 'fits': fits}
        if free is not None:
            tables['free_control'] = free
        self.archive.add_run('scaling', manifest, tables, fits.to_dict(orient='records'), summary.verdict, code)

        print(report.rows.to_string(index=False, float_format=lambda v: f'{v:.6e}'))
        if len(fits):
            print(fits[['column', 'slope', 'predicted', 'kind', 'verdict', 'required']].to_string(index=False))
        print(f"mu = {float(expo.mu):.6g}; blow-up verdict: {summary.verdict}")
        for line in failed_required + [f"missing fit: {m}" for m in missing_required]:
            logger.error(f"Required fit failed: {line}")
        if summary.free_bounded is False:
            logger.error(f"Free-flow control ratio {summary.free_ratio:.3f} is not below {tol.free_control_ratio}")
        logger.info(f"Scaling command finished with exit code {code}")
        return code

    def cmd_evolve(self):
        """Magnetic vs free flow fidelity to W_R(t) at the evolve scale."""
        started = time.time()
        ev = self.config.evolve
        params = self.construction_params(ev.R)
        result = persistence_experiment(params, make_cutoffs(), self.policy(), ev.checkpoints, ev.dt,
                                        ev.max_dt_potential, ev.max_dt_frequency)
        frame = result.to_frame()
        write_frame_csv(frame, self._path('evolve', 'fidelity.csv'), self.config_hash)
        write_plot_data(frame['t'], frame['fidelity_magnetic'], self._path('evolve', 'plot_fidelity_magnetic.dat'),
                        self.config_hash, 'fidelity_magnetic', log=False, x_label='t')
        write_plot_data(frame['t'], frame['fidelity_free'], self._path('evolve', 'plot_fidelity_free.dat'),
                        self.config_hash, 'fidelity_free', log=False, x_label='t')
        if result.final_magnetic is not None:
            write_spinor_field(self._path('evolve', 'final_magnetic.field'), result.final_magnetic, self.config_hash)
            write_spinor_field(self._path('evolve', 'final_free.field'), result.final_free, self.config_hash)

        passed = result.dominates and result.strict_at_horizon
        code = EXIT_OK if passed else EXIT_VERDICT
        manifest = self._base_manifest('evolve', started)
        manifest.update({'R': ev.R, 'dt': result.dt, 'steps': result.steps, 'dominates': result.dominates,
                         'strict_at_horizon': result.strict_at_horizon, 'exit_code': code})
        write_manifest(self._path('evolve', 'manifest.json'), manifest)
        self.archive.add_run('evolve', manifest, {'fidelity': frame},
                             verdict='dominates' if passed else 'not_dominating', exit_code=code)
        print(frame.to_string(index=False, float_format=lambda v: f'{v:.6f}'))
        logger.info(f"Evolve command finished with exit code {code}")
        return code

    @staticmethod
    def cmd_exponents(p, q, delta, gamma, beta):
        """Pure arithmetic; no config or cache needed."""
        pair = admissible(p, q)
        report = exponents_from_values(delta, gamma, beta, pair)
        print(format_exponents(report, pair, float(delta), float(gamma), float(beta)))
        return report

    def cmd_report(self, export=None, run_id=None, table=None):
        """List archived runs, optionally exporting the listing or one stored table to CSV."""
        archive = self.archive
        info = archive.get_archive_info()
        print(json.dumps({k: v for k, v in info.items() if k != 'archive info'}, indent=2, default=str))
        runs = archive.list_runs()
        print(runs.to_string(index=False) if len(runs) else "No runs archived yet")
        if table is not None:
            run_id = run_id or archive.latest_run()
            target = export or self._path('report', f'{table}_{run_id[:8]}.csv')
            archive.export_table(run_id, table, target)
        elif export is not None:
            archive.export_listing(export)
        return EXIT_OK

    def run(self, command, **kwargs):
        """Dispatch a command and turn escaping lab errors into exit codes."""
        handler = {'eigen': self.cmd_eigen, 'scaling': self.cmd_scaling, 'evolve': self.cmd_evolve,
                   'report': self.cmd_report}.get(command)
        if handler is None:
            logger.error(f"Unknown command '{command}'")
            return EXIT_USAGE
        try:
            return handler(**kwargs)
        except LabError as e:
            logger.error(f"Failed to run {command}: {e}")
            return exit_code_for(e)
