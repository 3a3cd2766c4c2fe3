"""Hand-written SVG ROC overlays: wavelet runs solid, raw runs dotted."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 80, 40, 50, 70


def _xy(fpr, tpr):
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM
    return LEFT + fpr * pw, TOP + (1.0 - tpr) * ph


def _polyline(curve, style):
    pts = " ".join("%.2f,%.2f" % _xy(f, t) for f, t in zip(curve.fpr, curve.tpr))
    return f'<polyline fill="none" points="{pts}" {style}/>'


def roc_overlay_svg(name, curve_raw, curve_wavelet) -> str:
    """Return an 800x600 SVG document with both curves on unit axes."""
    x0, y0 = _xy(0.0, 0.0)
    x1, y1 = _xy(1.0, 1.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="30" text-anchor="middle" font-size="18" font-family="sans-serif">'
        f"ROC: {escape(name)}</text>",
        f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
        'fill="none" stroke="black"/>',
    ]
    for i in range(6):
        v = i / 5
        gx, _ = _xy(v, 0.0)
        _, gy = _xy(0.0, v)
        out.append(f'<line x1="{gx:.2f}" y1="{y0:.2f}" x2="{gx:.2f}" y2="{y0 + 6:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{gx:.2f}" y="{y0 + 22:.2f}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif">{v:.1f}</text>'
        )
        out.append(f'<line x1="{x0 - 6:.2f}" y1="{gy:.2f}" x2="{x0:.2f}" y2="{gy:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{x0 - 10:.2f}" y="{gy + 4:.2f}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif">{v:.1f}</text>'
        )
    out.append(
        f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="14" '
        'font-family="sans-serif">False positive rate</text>'
    )
    out.append(
        f'<text x="20" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" font-size="14" font-family="sans-serif" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2:.2f})">True positive rate</text>'
    )
    out.append(
        f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" stroke="#bbbbbb" stroke-width="1"/>'
    )

    legend = []
    if curve_wavelet is not None:
        out.append(_polyline(curve_wavelet, 'stroke="#1f77b4" stroke-width="2"'))
        legend.append(("#1f77b4", "", f"wavelet (AUC {curve_wavelet.auc:.3f})"))
    if curve_raw is not None:
        out.append(_polyline(curve_raw, 'stroke="#d62728" stroke-width="2" stroke-dasharray="2,4"'))
        legend.append(("#d62728", ' stroke-dasharray="2,4"', f"raw (AUC {curve_raw.auc:.3f})"))
    for i, (color, dash, label) in enumerate(legend):
        ly = y0 - 60 + 22 * i
        out.append(
            f'<line x1="{x1 - 210:.2f}" y1="{ly:.2f}" x2="{x1 - 170:.2f}" y2="{ly:.2f}" '
            f'stroke="{color}" stroke-width="2"{dash}/>'
        )
        out.append(
            f'<text x="{x1 - 160:.2f}" y="{ly + 4:.2f}" font-size="13" font-family="sans-serif">'
            f"{escape(label)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_filename(name: str) -> str:
    return "roc_" + name.replace(" ", "_") + ".svg"


def write_overlays(report, out_dir, classes) -> list:
    out_dir = Path(out_dir)
    written = []
    for name in classes:
        path = out_dir / svg_filename(name)
        path.write_text(roc_overlay_svg(name, report.raw.curves.get(name), report.wavelet.curves.get(name)), encoding="utf-8")
        written.append(path)
    return written
