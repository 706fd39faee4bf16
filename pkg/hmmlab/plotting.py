"""SVG line charts of sweep results, rendered through a Django template."""
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from django.template.loader import render_to_string

from .exceptions import DataFormatError
from .harness import aggregate
from .utils import format_value, read_table

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 400
MARGIN = {'left': 70, 'right': 120, 'top': 30, 'bottom': 50}
PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b', '#e377c2', '#17becf']
TICKS = 5


def _x_column(spec, frame):
    if spec.x == 'NT':
        for col in ('N', 'T'):
            if col not in frame.columns:
                raise DataFormatError(f"{spec.input} lacks column(s): {col}")
        frame = frame.assign(NT=frame['N'] * frame['T'])
    return frame


def chart_frame(spec):
    """Per (group, x) rows with mean, q25 and q75 of the chosen metric.

    Accepts raw record CSVs (aggregated here) and summary CSVs that already
    carry <metric>_mean/_q25/_q75 columns.
    """
    mean_col = f"{spec.metric}_mean"
    frame = read_table(spec.input)
    if frame.empty:
        raise DataFormatError(f"{spec.input} has no data rows")
    summary = mean_col in frame.columns
    needed = [spec.x if spec.x != 'NT' else None]
    needed.append(mean_col if summary else spec.metric)
    if spec.group:
        needed.append(spec.group)
    missing = [c for c in needed if c and c not in frame.columns]
    if missing:
        raise DataFormatError(f"{spec.input} lacks column(s): {', '.join(missing)}")
    frame = _x_column(spec, frame)
    keys = ([spec.group] if spec.group else []) + [spec.x]
    if not summary:
        frame = aggregate(frame, keys)
    for stat in ('q25', 'q75'):
        col = f"{spec.metric}_{stat}"
        if col not in frame.columns:
            frame[col] = frame[mean_col]
    columns = keys + [mean_col, f"{spec.metric}_q25", f"{spec.metric}_q75"]
    out = frame[columns].dropna(subset=[mean_col])
    if out.empty:
        raise DataFormatError(f"{spec.input} has no finite {spec.metric} values")
    return out.sort_values(keys).reset_index(drop=True)


class _Axis:
    def __init__(self, values, lo_px, hi_px, log=False):
        values = np.asarray(values, dtype=float)
        if log and np.any(values <= 0):
            raise DataFormatError('log scale needs positive x values')
        self.log = log
        data = np.log10(values) if log else values
        lo, hi = float(data.min()), float(data.max())
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi = lo, hi
        self.lo_px, self.hi_px = lo_px, hi_px

    def __call__(self, value):
        v = np.log10(value) if self.log else value
        return self.lo_px + (v - self.lo) / (self.hi - self.lo) * (self.hi_px - self.lo_px)

    def ticks(self):
        positions = np.linspace(self.lo, self.hi, TICKS)
        values = 10.0 ** positions if self.log else positions
        return [{'px': f"{self(v):.2f}", 'label': format_value(float(v), digits=3)} for v in values]


def _points(xs, ys, x_axis, y_axis):
    return ' '.join(f"{x_axis(x):.2f},{y_axis(y):.2f}" for x, y in zip(xs, ys))


def chart_context(spec, frame):
    m = spec.metric
    x_axis = _Axis(frame[spec.x], MARGIN['left'], WIDTH - MARGIN['right'], log=spec.log_x)
    y_values = pd.concat([frame[f"{m}_q25"], frame[f"{m}_mean"], frame[f"{m}_q75"]])
    y_axis = _Axis(y_values, HEIGHT - MARGIN['bottom'], MARGIN['top'])
    groups = frame.groupby(spec.group, sort=True) if spec.group else [(None, frame)]
    series = []
    for i, (name, rows) in enumerate(groups):
        name = name[0] if isinstance(name, tuple) else name
        xs = rows[spec.x].to_numpy(dtype=float)
        mean = rows[f"{m}_mean"].to_numpy(dtype=float)
        q25 = rows[f"{m}_q25"].to_numpy(dtype=float)
        q75 = rows[f"{m}_q75"].to_numpy(dtype=float)
        band = _points(np.concatenate([xs, xs[::-1]]), np.concatenate([q75, q25[::-1]]), x_axis, y_axis)
        series.append({
            'label': '' if name is None else f"{spec.group}={format_value(name)}",
            'group': '' if name is None else format_value(name),
            'color': PALETTE[i % len(PALETTE)],
            'points': _points(xs, mean, x_axis, y_axis),
            'band': band,
            'data_x': ' '.join(format_value(float(v)) for v in xs),
            'data_y': ' '.join(format_value(float(v)) for v in mean),
            'markers': [{'cx': f"{x_axis(x):.2f}", 'cy': f"{y_axis(y):.2f}"} for x, y in zip(xs, mean)],
            'legend_y': MARGIN['top'] + 18 * i,
        })
    x_label = {'N': 'N (sequences)', 'T': 'T (fixations per sequence)', 'NT': 'N*T (fixations)'}.get(spec.x, spec.x)
    return {
        'width': WIDTH,
        'height': HEIGHT,
        'left': MARGIN['left'],
        'right': WIDTH - MARGIN['right'],
        'top': MARGIN['top'],
        'bottom': HEIGHT - MARGIN['bottom'],
        'legend_x': WIDTH - MARGIN['right'] + 10,
        'x_label': x_label + (' (log scale)' if spec.log_x else ''),
        'y_label': f"mean {m}",
        'x_ticks': x_axis.ticks(),
        'y_ticks': y_axis.ticks(),
        'series': series,
        'title': f"{m} versus {spec.x}",
    }


def render_chart(spec):
    """Render spec.input as an SVG chart and write it to spec.output."""
    frame = chart_frame(spec)
    svg = render_to_string('hmmlab/line_chart.svg', chart_context(spec, frame))
    path = Path(spec.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding='utf-8')
    logger.info('wrote %s (%d series)', path, frame[spec.group].nunique() if spec.group else 1)
    return path
