"""Regenerates the synthetic fixture fonts used by the unit tests.

Run from this directory: python3 make_fonts.py
"""

from fontTools.fontBuilder import FontBuilder
from fontTools.pens.t2CharStringPen import T2CharStringPen
from fontTools.pens.ttGlyphPen import TTGlyphPen

UPM = 1000
ASCENT, DESCENT = 880, -120


def rect(pen, x0, y0, x1, y1):
    pen.moveTo((x0, y0))
    pen.lineTo((x0, y1))
    pen.lineTo((x1, y1))
    pen.lineTo((x1, y0))
    pen.closePath()


def eternity(pen):
    # Blocky stand-in for U+6C38: a dot, a hooked vertical and two side strokes.
    rect(pen, 440, 700, 560, 820)
    rect(pen, 450, 40, 550, 640)
    rect(pen, 300, 40, 450, 120)
    rect(pen, 150, 420, 420, 500)
    rect(pen, 580, 380, 850, 460)


def ring(pen):
    pen.moveTo((500, 80))
    pen.qCurveTo((820, 80), (820, 400))
    pen.qCurveTo((820, 720), (500, 720))
    pen.qCurveTo((180, 720), (180, 400))
    pen.qCurveTo((180, 80), (500, 80))
    pen.closePath()
    pen.moveTo((500, 200))
    pen.qCurveTo((300, 200), (300, 400))
    pen.qCurveTo((300, 600), (500, 600))
    pen.qCurveTo((700, 600), (700, 400))
    pen.qCurveTo((700, 200), (500, 200))
    pen.closePath()


def ring_cubic(pen):
    # Exact degree elevation of the quadratic ring.
    class Elevate:
        def __init__(self, pen):
            self.pen, self.cur = pen, None

        def moveTo(self, p):
            self.pen.moveTo(p)
            self.cur = p

        def qCurveTo(self, q, p):
            c1 = tuple(a + 2 * (b - a) / 3 for a, b in zip(self.cur, q))
            c2 = tuple(a + 2 * (b - a) / 3 for a, b in zip(p, q))
            self.pen.curveTo(c1, c2, p)
            self.cur = p

        def closePath(self):
            self.pen.closePath()

    ring(Elevate(pen))


def letter(k):
    def draw(pen):
        rect(pen, 150 + 20 * k, 100, 300 + 20 * k, 700)
        rect(pen, 300 + 20 * k, 600 - 40 * k, 800, 700 - 40 * k)
    return draw


def notdef(pen):
    rect(pen, 100, 0, 600, 700)


SHAPES = {
    0x0020: None,
    0x0041: letter(0),
    0x0042: letter(1),
    0x0043: letter(2),
    0x0044: letter(3),
    0x004F: "ring",
    0x6C38: eternity,
}


def build(path, codepoints, cff):
    order = [".notdef"] + [f"uni{cp:04X}" for cp in codepoints]
    fb = FontBuilder(UPM, isTTF=not cff)
    fb.setupGlyphOrder(order)
    fb.setupCharacterMap({cp: f"uni{cp:04X}" for cp in codepoints})
    drawers = {".notdef": notdef}
    for cp in codepoints:
        shape = SHAPES[cp]
        if shape == "ring":
            shape = ring_cubic if cff else ring
        drawers[f"uni{cp:04X}"] = shape
    if cff:
        charstrings = {}
        for name in order:
            pen = T2CharStringPen(600, None)
            if drawers[name] is not None:
                drawers[name](pen)
            charstrings[name] = pen.getCharString()
        fb.setupCFF("SynthCFF", {"FullName": "Synth CFF"}, charstrings, {})
    else:
        glyphs = {}
        for name in order:
            pen = TTGlyphPen(None)
            if drawers[name] is not None:
                drawers[name](pen)
            glyphs[name] = pen.glyph()
        fb.setupGlyf(glyphs)
    fb.setupHorizontalMetrics({name: (1000, 0) for name in order})
    fb.setupHorizontalHeader(ascent=ASCENT, descent=DESCENT)
    fb.setupNameTable({"familyName": path.split(".")[0], "styleName": "Regular"})
    fb.setupOS2(sTypoAscender=ASCENT, usWinAscent=ASCENT, usWinDescent=-DESCENT)
    fb.setupPost()
    if not cff:
        fb.setupMaxp()
    fb.save(path)


if __name__ == "__main__":
    every = sorted(SHAPES)
    build("synth_glyf.ttf", every, cff=False)
    build("synth_cff.otf", every, cff=True)
    build("synth_abc.ttf", [0x0041, 0x0042, 0x0043], cff=False)
    build("synth_bcd.ttf", [0x0042, 0x0043, 0x0044], cff=False)
    build("synth_cjk_only.ttf", [0x6C38], cff=False)
