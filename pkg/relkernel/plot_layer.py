"""
Plot Layer - SVG scatter of log-ratios with the fitted band
"""
import math

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from relkernel import __version__  # noqa: E402
from relkernel.errors import ParameterDomainError  # noqa: E402
from relkernel.logging_config import get_logger  # noqa: E402
from relkernel.storage_layer import ensure_dir  # noqa: E402

logger = get_logger(__name__)

AXES = {
    't': ('t', lambda rec: rec.t),
    'distance': ('|x - y|', lambda rec: rec.distance),
    'delta': ('min(delta_D(x), delta_D(y))', lambda rec: min(rec.delta_x, rec.delta_y)),
}


def emit_plot_svg(report, path, axis='t'):
    """
    log(ratio) against t, |x - y| or the smaller boundary distance, with
    lines at +-log C. Returns the plotted point count and band half-width.
    """
    if axis not in AXES:
        raise ParameterDomainError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
    if not report.records:
        raise ParameterDomainError("cannot plot an empty report")
    label, getter = AXES[axis]
    xs, ys = [], []
    for rec in report.records:
        value = getter(rec)
        if value is None or not math.isfinite(value) or not rec.ratio > 0 or not math.isfinite(rec.ratio):
            continue
        xs.append(float(value))
        ys.append(math.log(rec.ratio))
    if not xs:
        raise ParameterDomainError(f"no record has a finite {axis} value")
    fitted = (report.summary or {}).get('fitted') or {}
    big_c = fitted.get('C')
    band = math.log(big_c) if big_c and math.isfinite(big_c) else float(np.max(np.abs(ys)))

    plt.rcParams['svg.hashsalt'] = 'relkernel'
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.scatter(xs, ys, s=12, color='tab:blue', label='log(estimate / comparator)')
    ax.axhline(band, color='tab:red', linestyle='--', linewidth=1.0, label=f"+-log C, C={math.exp(band):.3g}")
    ax.axhline(-band, color='tab:red', linestyle='--', linewidth=1.0)
    ax.axhline(0.0, color='0.6', linewidth=0.8)
    if min(xs) > 0 and max(xs) / min(xs) > 20.0:
        ax.set_xscale('log')
    ax.set_xlabel(label)
    ax.set_ylabel('log ratio')
    tag = (report.config or {}).get('theorem_tag') or (report.config or {}).get('check', '')
    ax.set_title(f"{tag}: {report.verdict.upper()}")
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    ensure_dir(path)
    fig.savefig(path, format='svg', metadata={'Date': None, 'Creator': f'relkernel {__version__}'})
    plt.close(fig)
    logger.debug("plotted %d points against %s to %s", len(xs), axis, path)
    return {'n_points': len(xs), 'band': band, 'axis': axis}
