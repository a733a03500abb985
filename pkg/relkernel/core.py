"""
Core Orchestrator - Runs one configured command through the layers
"""
import math
import time

import numpy as np
import pandas as pd

from relkernel.analytics_layer import RatioAnalytics, empirical_constants
from relkernel.config import Config
from relkernel.errors import EmptySweepError, ParameterDomainError, RelKernelError
from relkernel.estimator_layer import MonteCarloEstimator, free_kernel_reference
from relkernel.kernel_layer import free_kernel, free_kernel_comparator
from relkernel.levy_layer import levy_density, removed_density, removed_mass, thinning_probability
from relkernel.logging_config import get_logger
from relkernel.plot_layer import emit_plot_svg
from relkernel.simulation_layer import RngStream, simulate_killed_batch
from relkernel.special_layer import psi
from relkernel.storage_layer import emit_csv, emit_report_json, emit_table, write_json
from relkernel.verification_layer import RatioReport, run_exit_time_check, run_sweep

logger = get_logger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

_DEFAULT_RADII = (0.1, 0.5, 1.0, 2.0, 5.0)


class RelKernelCore:
    """Dispatches a RunConfig to the layer that handles its command"""

    def __init__(self, run_config):
        self.run_config = run_config
        self.params = run_config.params
        self._handlers = {
            'levy': self.run_levy,
            'kernel': self.run_kernel,
            'simulate': self.run_simulate,
            'estimate': self.run_estimate,
            'sweep': self.run_sweep,
            'exit-check': self.run_exit_check,
            'report': self.run_report,
        }

    def execute(self):
        """Run the configured command; returns the process exit code"""
        cfg = self.run_config
        start = time.time()
        print(f"relkernel {cfg.command}: d={self.params.d} alpha={self.params.alpha:g} m={self.params.m:g} "
              f"seed={cfg.seed}")
        try:
            code = self._handlers[cfg.command]()
        except RelKernelError as e:
            logger.debug("command %s failed", cfg.command, exc_info=True)
            print(f"❌ {cfg.command} failed: {e}")
            return EXIT_ERROR
        except OSError as e:
            print(f"❌ could not write results: {e}")
            return EXIT_ERROR
        print(f"   finished in {time.time() - start:.1f}s, results in {cfg.output_dir}")
        return code

    # single evaluations

    def run_levy(self):
        radii = self.run_config.query.get('r', _DEFAULT_RADII)
        rows = []
        for r in radii:
            rows.append({
                'r': float(r),
                'psi': psi(self.params.m_root * r, self.params),
                'levy_density': levy_density(r, self.params),
                'removed_density': removed_density(r, self.params),
                'keep_probability': float(thinning_probability(r, self.params)),
            })
        frame = pd.DataFrame(rows)
        emit_table(frame, self.run_config.path('levy.csv'))
        write_json({'params': self.params.to_dict(), 'removed_mass': removed_mass(self.params)},
                   self.run_config.path('levy.json'))
        print(frame.to_string(index=False))
        return EXIT_PASS

    def run_kernel(self):
        t = self.run_config.query.get('t', 1.0)
        radii = self.run_config.query.get('r', _DEFAULT_RADII)
        rows = []
        for r in radii:
            x = np.zeros(self.params.d)
            x[0] = r
            value = free_kernel(t, x, self.params)
            comparator = free_kernel_comparator(t, r, self.params)
            rows.append({'t': float(t), 'r': float(r), 'kernel': value, 'comparator': comparator,
                         'ratio': value / comparator})
        frame = pd.DataFrame(rows)
        emit_table(frame, self.run_config.path('kernel.csv'))
        print(frame.to_string(index=False))
        return EXIT_PASS

    def _start(self, key='x'):
        dom = self.run_config.domain
        if key in self.run_config.query:
            return np.asarray(self.run_config.query[key], dtype=float)
        try:
            return dom.anchor_point()
        except ParameterDomainError:
            return np.zeros(self.params.d) if dom.contains(np.zeros(self.params.d)) else None

    def run_simulate(self):
        cfg = self.run_config
        start = self._start()
        if start is None:
            raise ParameterDomainError("query.x is required for domains without an anchor point")
        horizon = cfg.query.get('t', 1.0)
        batch = simulate_killed_batch(cfg.domain, start, self.params, horizon, cfg.mc.grid_steps,
                                      cfg.mc.n_samples, RngStream(cfg.seed, 0))
        emit_table(pd.DataFrame({'t': batch.times, 'survival': batch.survival}), cfg.path('simulate.csv'))
        exited = np.isfinite(batch.exit_times)
        summary = {
            'domain': cfg.domain.to_dict(),
            'params': self.params.to_dict(),
            'start': start.tolist(),
            'horizon': float(horizon),
            'n_paths': int(cfg.mc.n_samples),
            'exited_fraction': float(exited.mean()),
            'mean_exit_time': float(batch.exit_times[exited].mean()) if exited.any() else None,
        }
        write_json(summary, cfg.path('simulate.json'))
        print(f"   survival at t={horizon:g}: {batch.survival[-1]:.4f}")
        return EXIT_PASS

    def run_estimate(self):
        cfg = self.run_config
        quantity = cfg.query['quantity']
        estimator = MonteCarloEstimator(self.params, cfg.mc)
        out = {'quantity': quantity, 'domain': cfg.domain.to_dict(), 'params': self.params.to_dict(),
               'mc': cfg.mc.to_dict()}
        if quantity == 'lambda1':
            est = estimator.lambda1(cfg.domain)
            out.update({'value': est.lambda1, 'std_err': est.std_err, 'window': list(est.window)})
        else:
            x = self._start('x')
            if x is None:
                raise ParameterDomainError("query.x is required for this domain")
            out['x'] = x.tolist()
            t = cfg.query.get('t', 1.0)
            if quantity == 'survival':
                est = estimator.survival(cfg.domain, t, x)
                out['t'] = t
            else:
                if 'y' not in cfg.query:
                    raise ParameterDomainError(f"query.y is required for the {quantity} estimate")
                y = np.asarray(cfg.query['y'], dtype=float)
                out['y'] = y.tolist()
                if quantity == 'green':
                    est = estimator.green(cfg.domain, x, y)
                else:
                    est = estimator.killed_kernel(cfg.domain, t, x, y)
                    out['t'] = t
                    if cfg.domain.kind == 'full-space':
                        out['reference'] = free_kernel_reference(t, x, y, self.params)
            out.update({'value': est.value, 'std_err': est.std_err})
        write_json(out, cfg.path('estimate.json'))
        print(f"   {quantity} = {out['value']:.6g} +- {out['std_err']:.2g}")
        return EXIT_PASS

    # verdict commands

    def _emit(self, report):
        cfg = self.run_config
        emit_csv(report, cfg.path(Config.CSV_NAME))
        emit_report_json(report, cfg.path(Config.JSON_NAME))
        if report.records:
            try:
                emit_plot_svg(report, cfg.path(Config.SVG_NAME), axis=cfg.plot_axis)
            except ParameterDomainError as e:
                print(f"⚠️ plot skipped: {e}")
        big_c = (report.summary.get('fitted') or {}).get('C')
        band = f", C={big_c:.4g}" if big_c is not None and math.isfinite(big_c) else ""
        if report.passed:
            print(f"✅ PASS ({len(report.records)} points, {report.dropped_points} dropped{band})")
            return EXIT_PASS
        print(f"❌ FAIL: {report.reason}")
        return EXIT_FAIL

    def run_sweep(self):
        sweep = self.run_config.sweep
        try:
            report = run_sweep(sweep)
        except EmptySweepError as e:
            report = RatioReport.failed(sweep.to_dict(), str(e), dropped=e.dropped)
        if report.records:
            retention = RatioAnalytics(report).get_retention()
            print(f"   retained {retention['retained_fraction']:.0%} of the sweep points")
        return self._emit(report)

    def run_exit_check(self):
        return self._emit(run_exit_time_check(self.run_config.exit_check))

    def run_report(self):
        constants = empirical_constants(self.params)
        write_json(constants, self.run_config.path('constants.json'))
        for key, value in constants.items():
            if key != 'params':
                print(f"   {key:12s} {value:.6g}")
        return EXIT_PASS
