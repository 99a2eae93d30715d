"""Envelope norms and fitted growth exponents for the built-in models and the tree class.

    python3 scripts/envelope_profiles.py
"""

from fractions import Fraction

import numpy as np

from shaperate.envelopes import (
    ENVELOPE_MODELS,
    build_tree_class,
    critical_level,
    envelope_profile,
    tree_envelope_check,
)


def main():
    deltas = np.geomspace(1e-4, 1e-1, 7)
    print(f"{'model':20s} gamma_hat  tau     predicted rate")
    for model in ENVELOPE_MODELS:
        p = envelope_profile(model, deltas)
        print(f"{model:20s} {p.gamma_hat:.4f}     {p.log_correction:+.3f}  n^-{p.predicted_rate:.4f}")
    grid = np.geomspace(1e-3, 1.0, 301)
    print("\ntree class: max ||F(delta)|| / delta^gamma over delta in [1e-3, 1]")
    for gamma in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        tree = build_tree_class(gamma, critical_level(build_tree_class(gamma, 1), 1e-3))
        print(f"  gamma {str(gamma):4s} depth {tree.max_level:2d}  check {tree_envelope_check(tree, grid):.4f}")


if __name__ == "__main__":
    main()
