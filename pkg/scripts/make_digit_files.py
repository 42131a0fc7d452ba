"""Regenerate the shipped constant digit files (needs mpmath, not a runtime dependency)."""
import pathlib
import sys

import mpmath

DIGITS = 2200
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "pcfmatch" / "data" / "constants"

SOURCES = {
    "e": lambda: mpmath.e,
    "pi": lambda: mpmath.pi,
    "zeta3": lambda: mpmath.zeta(3),
    "catalan": lambda: mpmath.catalan,
}


def main(digits=DIGITS):
    OUT.mkdir(parents=True, exist_ok=True)
    for name, fn in SOURCES.items():
        with mpmath.workdps(digits + 30):
            text = mpmath.nstr(fn(), digits + 20, strip_zeros=False)
        intpart, frac = text.split(".")
        significant_int = len(intpart.lstrip("0"))
        expansion = intpart + "." + frac[: digits - significant_int]
        (OUT / f"{name}.txt").write_text(f"# {name} {digits}\n{expansion}\n")
        print(name, expansion[:20])


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else DIGITS)
