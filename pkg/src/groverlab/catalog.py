"""Named circuit catalogs, published theoretical probabilities and target fixtures."""

from __future__ import annotations

CATALOG: dict[int, tuple[str, ...]] = {
    3: ("D3M3", "D2M3", "G1D2M2", "D3D3M3", "D3M1|D2M2", "D2M1|D2M2"),
    4: (
        "D4M4", "D3M4", "D2M4", "G1D3M3", "G2D2M2",
        "D4D4M4", "D3D4M4", "D2D4M4",
        "D4M1|D3M3", "D3M1|D3M3", "D2M1|D3M3",
        "D4M2|D2M2", "D3M2|D2M2", "D2M2|D2M2",
    ),
    5: ("D5M5", "G2D3M3", "G3D2M2", "D2M2|D3M3", "D3M3|D2M2"),
}

# Standard Grover plans (global diffusion only) in each catalog.
STANDARD = {3: ("D3M3", "D3D3M3"), 4: ("D4M4", "D4D4M4"), 5: ("D5M5",)}

# Theoretical success probabilities as printed (three decimals).
PUBLISHED_P_THEO: dict[int, dict[str, float]] = {
    3: {
        "D3M3": 0.781, "D2M3": 0.5, "G1D2M2": 0.5, "D3D3M3": 0.945,
        "D3M1|D2M2": 0.875, "D2M1|D2M2": 0.750,
    },
    4: {
        "D4M4": 0.473, "D3M4": 0.390, "D2M4": 0.250, "G1D3M3": 0.391,
        "G2D2M2": 0.250, "D4D4M4": 0.908, "D3D4M4": 0.821, "D2D4M4": 0.660,
        "D4M1|D3M3": 0.561, "D3M1|D3M3": 0.537, "D2M1|D3M3": 0.488,
        "D4M2|D2M2": 0.578, "D3M2|D2M2": 0.531, "D2M2|D2M2": 0.438,
    },
    5: {
        "D5M5": 0.258, "G2D3M3": 0.195, "G3D2M2": 0.125,
        "D2M2|D3M3": 0.268, "D3M3|D2M2": 0.289,
    },
}

# Hardware success probabilities reported for reference only (never asserted).
REFERENCE_HARDWARE_P: dict[str, dict[str, float]] = {
    "vigo": {
        "D3M3": 0.538, "D2M3": 0.407, "G1D2M2": 0.415, "D3D3M3": 0.575,
        "D3M1|D2M2": 0.635, "D2M1|D2M2": 0.604,
        "D4M4": 0.165, "D3M4": 0.195, "D2M4": 0.173, "G1D3M3": 0.209,
        "G2D2M2": 0.199, "D4D4M4": 0.195, "D3D4M4": 0.151, "D2D4M4": 0.197,
        "D4M1|D3M3": 0.264, "D3M1|D3M3": 0.253, "D2M1|D3M3": 0.249,
        "D4M2|D2M2": 0.311, "D3M2|D2M2": 0.314, "D2M2|D2M2": 0.345,
    },
    "athens": {
        "D3M3": 0.559, "D2M3": 0.400, "G1D2M2": 0.443, "D3D3M3": 0.638,
        "D3M1|D2M2": 0.657, "D2M1|D2M2": 0.621,
        "D4M4": 0.181, "D3M4": 0.208, "D2M4": 0.170, "G1D3M3": 0.230,
        "G2D2M2": 0.211, "D4D4M4": 0.183, "D3D4M4": 0.205, "D2D4M4": 0.195,
        "D4M1|D3M3": 0.282, "D3M1|D3M3": 0.286, "D2M1|D3M3": 0.286,
        "D4M2|D2M2": 0.324, "D3M2|D2M2": 0.333, "D2M2|D2M2": 0.335,
    },
    "guadalupe": {
        "D5M5": 0.0257, "G2D3M3": 0.0654, "G3D2M2": 0.0963,
        "D2M2|D3M3": 0.0667, "D3M3|D2M2": 0.1014,
    },
}

# Thirty target strings per width, row-major as tabulated.
FIXTURE_TARGETS: dict[int, tuple[str, ...]] = {
    3: tuple(
        "001 101 010 001 001 111 010 111 001 100 "
        "011 000 100 111 010 011 110 111 110 011 "
        "101 111 110 001 001 000 001 001 001 001".split()
    ),
    4: tuple(
        "1001 1101 1010 0001 1110 0010 1001 0100 0011 0111 "
        "0001 0101 1110 0000 1010 1010 0101 0011 0001 0000 "
        "1100 0110 1111 0111 0000 0101 1101 1111 1000 0111".split()
    ),
    5: tuple(
        "01010 10001 01011 01000 11111 00000 00000 00100 01010 00010 "
        "01011 11100 10101 11010 00100 10100 01010 11001 01100 10001 "
        "00011 01101 00011 10000 10100 10000 11000 10100 11111 11000".split()
    ),
}

# Backend each width was run on.
DEFAULT_BACKEND = {2: "vigo", 3: "vigo", 4: "vigo", 5: "guadalupe"}


def catalog(n: int) -> tuple[str, ...]:
    if n not in CATALOG:
        raise KeyError(f"no catalog for n={n}; available: {sorted(CATALOG)}")
    return CATALOG[n]


def fixture_targets(n: int) -> tuple[str, ...]:
    if n not in FIXTURE_TARGETS:
        raise KeyError(f"no fixture targets for n={n}")
    return FIXTURE_TARGETS[n]
