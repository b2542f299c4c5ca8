"""
Excel workbook of a cross-validation report: one sheet per fold table,
pooled confusion matrix and summary figures.
"""

import re
import zipfile
from datetime import datetime
from io import BytesIO
from pathlib import Path

from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

HEADER_FILL = '1E3A5F'
MAX_COLUMN_WIDTH = 50

# Fixed document and archive timestamps keep report.xlsx byte-identical across runs
FIXED_TIMESTAMP = datetime(2000, 1, 1)
ZIP_DATE_TIME = (1980, 1, 1, 0, 0, 0)
CORE_PROPERTIES = 'docProps/core.xml'
CORE_DATES = re.compile(rb'(<dcterms:(created|modified)\b[^>]*>)[^<]*(</dcterms:\2>)')

THIN_BORDER = Border(
    left=Side(style='thin'),
    right=Side(style='thin'),
    top=Side(style='thin'),
    bottom=Side(style='thin'),
)


def style_header_row(ws, num_columns):
    header_font = Font(bold=True, color='FFFFFF')
    header_fill = PatternFill(start_color=HEADER_FILL, end_color=HEADER_FILL, fill_type='solid')
    for col in range(1, num_columns + 1):
        cell = ws.cell(row=1, column=col)
        cell.font = header_font
        cell.fill = header_fill
        cell.alignment = Alignment(horizontal='center', vertical='center')
        cell.border = THIN_BORDER


def auto_adjust_column_width(ws):
    for column in ws.columns:
        widest = max((len(str(cell.value)) for cell in column if cell.value is not None), default=0)
        ws.column_dimensions[get_column_letter(column[0].column)].width = min(widest + 2, MAX_COLUMN_WIDTH)


def _sheet(wb, title, headers, rows, first=False):
    ws = wb.active if first else wb.create_sheet()
    ws.title = title
    ws.append(headers)
    style_header_row(ws, len(headers))
    for row in rows:
        ws.append(row)
    ws.freeze_panes = 'A2'
    auto_adjust_column_width(ws)
    return ws


def write_workbook(path, report_data):
    """Write report_to_dict output as Folds, Confusion and Summary sheets."""
    class_names = report_data['class_names']
    wb = Workbook()

    _sheet(
        wb, 'Folds',
        ['Fold', 'Held-out painting', 'Author', 'Patches', 'Accuracy', 'Balanced accuracy',
         'Best epoch', 'Final accuracy', 'Vote'],
        [
            [f['fold_index'], f['held_out_painting'], f['author'], f['n_patches'], f['patch_accuracy'],
             f['balanced_accuracy'], f['best_epoch'], f['final_accuracy'], f['painting_vote']]
            for f in report_data['folds']
        ],
        first=True,
    )
    _sheet(
        wb, 'Confusion',
        ['True \\ predicted', *class_names],
        [[name, *row] for name, row in zip(class_names, report_data['confusion'])],
    )
    summary = report_data['summary']
    _sheet(
        wb, 'Summary',
        ['Metric', 'Value'],
        [
            ['Model family', report_data['model_family']],
            ['Folds', summary['n_folds']],
            ['Mean accuracy', summary['mean_accuracy']],
            ['Std accuracy', summary['std_accuracy']],
            ['Pooled balanced accuracy', summary['pooled_balanced_accuracy']],
            *[[f'Accuracy ({name})', value] for name, value in zip(class_names, summary['per_class_accuracy'])],
            ['Paintings voted correctly', f"{summary['vote_correct']}/{summary['vote_total']}"],
        ],
    )

    return save_workbook(wb, path)


def save_workbook(wb, path):
    """
    Save with pinned timestamps.

    openpyxl stamps the save time into the core properties and every zip
    entry, so the archive is rewritten with fixed values.
    """
    wb.properties.created = FIXED_TIMESTAMP
    wb.properties.modified = FIXED_TIMESTAMP
    buffer = BytesIO()
    wb.save(buffer)
    buffer.seek(0)

    stamp = FIXED_TIMESTAMP.strftime('%Y-%m-%dT%H:%M:%SZ').encode('ascii')
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(buffer) as source, zipfile.ZipFile(path, 'w', zipfile.ZIP_DEFLATED) as target:
        for info in source.infolist():
            data = source.read(info.filename)
            if info.filename == CORE_PROPERTIES:
                data = CORE_DATES.sub(lambda m: m.group(1) + stamp + m.group(3), data)
            entry = zipfile.ZipInfo(info.filename, date_time=ZIP_DATE_TIME)
            entry.compress_type = zipfile.ZIP_DEFLATED
            target.writestr(entry, data)
    return path
