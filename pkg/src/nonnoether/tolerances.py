"""Central tolerance table for every gate.

Upper bounds are multiplied by ``--tol-scale``; the lower bounds in
``FLOORS`` (minimum sizes that witness a genuine effect) are not scaled.
"""

DEFAULTS = {
    "antisymmetry": 1e-12,
    "nondegeneracy": 1e-12,
    "closedness": 1e-6,
    "liouville": 1e-6,
    "symmetry_residual": 1e-7,
    "symmetry_witness_min": 0.1,
    "negative_control_min": 0.1,
    "conservation_bracket": 1e-5,
    "trace_consistency": 1e-8,
    "pairing_gap": 1e-6,
    "cross_formula": 1e-6,
    "torsion": 1e-5,
    "lenard": 1e-5,
    "involution": 1e-5,
    "energy_drift": 1e-7,
    "invariant_drift": 1e-5,
}

FLOORS = frozenset({"symmetry_witness_min", "negative_control_min"})


def scaled(scale: float = 1.0) -> dict:
    if not scale > 0:
        raise ValueError(f"tolerance scale must be positive, got {scale}")
    return {k: (v if k in FLOORS else v * scale) for k, v in DEFAULTS.items()}
