import csv
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .exceptions import DataFormatError
from .hmm import validate_hmm
from .serializers import HmmSchema

logger = logging.getLogger(__name__)

FIXATION_HEADER = ['seq_id', 't', 'x', 'y']
FLOAT_DIGITS = 9


def format_value(value, digits=FLOAT_DIGITS):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            return ''
        return f"{float(value):.{digits}g}"
    return str(value)


def _describe(exc):
    return '; '.join(
        f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    )


def load_model(path, model):
    """Parse a JSON file into a pydantic model, reporting field paths on failure."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise DataFormatError(f"{path}: {_describe(exc)}") from exc


def dump_model(instance, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(instance.model_dump_json(indent=2) + '\n', encoding='utf-8')
    logger.info('wrote %s', path)


def load_hmm(path):
    h = load_model(path, HmmSchema).to_hmm()
    validate_hmm(h).raise_for_errors()
    return h


def save_hmm(h, path):
    validate_hmm(h).raise_for_errors()
    dump_model(HmmSchema.from_hmm(h), path)


def read_fixations_csv(path):
    """Read seq_id,t,x,y rows into sequences ordered by first appearance and t."""
    sequences = {}
    try:
        handle = open(path, newline='', encoding='utf-8')
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise DataFormatError('empty fixation file', line=1)
        if [h.strip() for h in header] != FIXATION_HEADER:
            raise DataFormatError(f"header must be {','.join(FIXATION_HEADER)}", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(f"expected 4 columns, got {len(row)}", line=line)
            try:
                seq_id, t, x, y = row[0].strip(), int(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise DataFormatError(str(exc), line=line) from exc
            if not (np.isfinite(x) and np.isfinite(y)):
                raise DataFormatError('non-finite coordinate', line=line)
            sequences.setdefault(seq_id, []).append((t, x, y))
    if not sequences:
        raise DataFormatError('no fixation rows')
    result = []
    for rows in sequences.values():
        rows.sort(key=lambda r: r[0])
        result.append(np.array([[x, y] for _, x, y in rows]))
    return result


def write_fixations_csv(sequences, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(FIXATION_HEADER)
        for seq_id, seq in enumerate(sequences):
            for t, (x, y) in enumerate(seq):
                writer.writerow([seq_id, t, format_value(x), format_value(y)])
    logger.info('wrote %d sequences to %s', len(sequences), path)


def write_records_csv(rows, columns, path):
    """Write pydantic records or dict rows with a fixed header and float format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            data = row if isinstance(row, dict) else row.model_dump()
            writer.writerow([format_value(data.get(col)) for col in columns])
    logger.info('wrote %s', path)


def write_frame_csv(frame, path):
    rows = frame.to_dict(orient='records')
    cleaned = [{k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in r.items()} for r in rows]
    write_records_csv(cleaned, list(frame.columns), path)


def read_table(path, required=()):
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataFormatError(f"{path} lacks column(s): {', '.join(missing)}")
    return frame
