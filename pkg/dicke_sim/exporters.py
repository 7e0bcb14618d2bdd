"""
Artifact writers for simulation results.

CSV and JSON are always deterministic. The spreadsheet, PDF and plot
writers are optional reports; those formats stamp creation metadata.
"""

from io import BytesIO
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union
import base64
import csv
import hashlib
import json
import logging

import numpy as np

from .exceptions import ExportError


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def to_jsonable(value: Any) -> Any:
    """Convert numpy values and complex numbers ([re, im]) into plain JSON types."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps_json(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, sort_keys=True) + '\n'


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps_json(data), encoding='utf-8')
    except (OSError, TypeError, ValueError) as e:
        raise ExportError(f"JSON export to {path} failed: {e}")
    logger.info(f"Wrote {path}")
    return path


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f'{float(value):.17g}'
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], columns: Sequence[Sequence[Any]]) -> Path:
    """
    Write equal-length columns under a header row.

    Args:
        path: Output file
        header: Column names
        columns: One sequence per column

    Returns:
        The written path
    """
    path = Path(path)
    if len(header) != len(columns):
        raise ExportError(f"CSV header has {len(header)} names for {len(columns)} columns")
    lengths = {len(c) for c in columns}
    if len(lengths) > 1:
        raise ExportError(f"CSV columns have unequal lengths {sorted(lengths)}")
    try:
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(list(header))
            for row in zip(*columns):
                writer.writerow([_format(v) for v in row])
    except OSError as e:
        raise ExportError(f"CSV export to {path} failed: {e}")
    logger.info(f"Wrote {path}")
    return path


def read_csv_columns(path: PathLike) -> Dict[str, np.ndarray]:
    """Read a numeric CSV written by write_csv (or a measured trace) into named columns."""
    path = Path(path)
    try:
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ExportError(f"Reading {path} failed: {e}")
    if len(rows) < 2:
        raise ExportError(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as e:
        raise ExportError(f"{path} contains non-numeric values: {e}")
    return {name: data[:, i] for i, name in enumerate(header)}


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(65536), b''):
            digest.update(block)
    return digest.hexdigest()


def plot_columns(x: Sequence[float], series: Mapping[str, Sequence[float]],
                 title: str = '', x_label: str = '', y_label: str = '') -> bytes:
    """
    Line plot of several series against x; returns PNG bytes.

    The figure is bound to its own Agg canvas and never enters pyplot's
    global figure registry, so sweep workers can plot concurrently.
    """
    try:
        from matplotlib.backends.backend_agg import FigureCanvasAgg
        from matplotlib.figure import Figure

        fig = Figure(figsize=(8, 5))
        FigureCanvasAgg(fig)
        ax = fig.add_subplot()
        for label, values in series.items():
            ax.plot(x, values, label=label)
        ax.set_title(title)
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        if series:
            ax.legend()
        buffer = BytesIO()
        fig.savefig(buffer, format='png', dpi=120, bbox_inches='tight')
        return buffer.getvalue()
    except Exception as e:
        raise ExportError(f"Plot creation failed: {e}")


def plot_data_uri(png: bytes) -> str:
    return f"data:image/png;base64,{base64.b64encode(png).decode('utf-8')}"


def write_png(path: PathLike, png: bytes) -> Path:
    path = Path(path)
    try:
        path.write_bytes(png)
    except OSError as e:
        raise ExportError(f"PNG export to {path} failed: {e}")
    return path


def write_xlsx(path: PathLike, header: Sequence[str], columns: Sequence[Sequence[Any]],
               summary: Optional[Mapping[str, Any]] = None) -> Path:
    """Spreadsheet with a data sheet and an optional summary sheet."""
    path = Path(path)
    try:
        from openpyxl import Workbook
        from openpyxl.styles import Font

        wb = Workbook()
        ws = wb.active
        ws.title = "Data"
        ws.append(list(header))
        for cell in ws[1]:
            cell.font = Font(bold=True)
        for row in zip(*columns):
            ws.append([float(v) if isinstance(v, (float, np.floating)) else v for v in row])

        if summary:
            ss = wb.create_sheet("Summary")
            ss.append(["Quantity", "Value"])
            for cell in ss[1]:
                cell.font = Font(bold=True)
            for key in sorted(summary):
                value = to_jsonable(summary[key])
                ss.append([key, value if isinstance(value, (int, float, str)) else json.dumps(value)])
        wb.save(path)
    except Exception as e:
        raise ExportError(f"Excel export to {path} failed: {e}")
    logger.info(f"Wrote {path}")
    return path


def write_pdf_summary(path: PathLike, title: str, summary: Mapping[str, Any],
                      png: Optional[bytes] = None) -> Path:
    """One-page PDF with a summary table and an optional figure."""
    path = Path(path)
    try:
        from reportlab.lib import colors
        from reportlab.lib.pagesizes import A4
        from reportlab.lib.styles import getSampleStyleSheet
        from reportlab.lib.units import inch
        from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

        styles = getSampleStyleSheet()
        story: List[Any] = [Paragraph(title, styles['Title']), Spacer(1, 12)]

        rows = [["Quantity", "Value"]]
        for key in sorted(summary):
            value = to_jsonable(summary[key])
            text = f'{value:.6g}' if isinstance(value, float) else json.dumps(value) if isinstance(value, (list, dict)) else str(value)
            rows.append([key, text])
        table = Table(rows)
        table.setStyle(TableStyle([
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
        ]))
        story.append(table)

        if png:
            story.append(Spacer(1, 12))
            story.append(Image(BytesIO(png), width=6 * inch, height=3.75 * inch))

        SimpleDocTemplate(str(path), pagesize=A4).build(story)
    except Exception as e:
        raise ExportError(f"PDF export to {path} failed: {e}")
    logger.info(f"Wrote {path}")
    return path
