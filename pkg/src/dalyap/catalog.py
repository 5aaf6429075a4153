"""Reference systems used throughout the tests and the CLI."""
from __future__ import annotations

from .polymap import PolyMap, parse_map

EXAMPLES = {
    1: "vars: x\nx -> 1/2*x - x^2 + 2*x^3 - 4*x^4\n",
    2: "vars: x y\n"
       "x -> -y + x^2*y + y^3\n"
       "y -> -x + x^3 + x*y^2\n",
    3: "vars: x y\nx -> 4*x^3\ny -> 9*y^3\n",
    4: "vars: x\nx -> -x^2 - 2*x^3 - 4*x^4 - 8*x^5\n",
    5: "vars: x y\nx -> -1/2*x + x*y\ny -> -1/2*y + x*y\n",
    6: "vars: x y z\n"
       "x -> 1/2*x*y + 1/4*x*z + 1/3*x^2*y + 1/12*x^2*z - 1/3*x*y^2 - 1/12*x*z^2"
       " - 1/12*x*y*z\n"
       "y -> -1/2*x*y + 1/2*y*z - 1/3*x^2*y + 1/3*x*y^2 + 1/3*y^2*z - 1/3*y*z^2"
       " + 1/6*x*y*z\n"
       "z -> -1/2*y*z - 1/4*x*z - 1/12*x^2*z - 1/3*y^2*z + 1/12*x*z^2 + 1/3*y*z^2"
       " - 1/12*x*y*z\n",
}

# unstable fixed points worth marking in figures
UNSTABLE_POINTS = {
    1: [(-0.271845,)],
    2: [(1.0, 1.0), (-1.0, -1.0)],
    5: [(1.5, 1.5)],
}


def example_map(example_id: int) -> PolyMap:
    try:
        return parse_map(EXAMPLES[example_id])
    except KeyError:
        raise ValueError(f"unknown example {example_id!r}") from None
