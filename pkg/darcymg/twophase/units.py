"""Field units used by the two-phase driver: ft, day, psi, cP, md."""

BBL_TO_FT3 = 5.614583
# bbl/day through 1 ft^2 under 1 psi/ft for 1 md and 1 cP
DARCY_FIELD = 0.001127
DARCY_FIELD_FT3 = DARCY_FIELD * BBL_TO_FT3


def bbl_to_ft3(volume: float) -> float:
    return volume * BBL_TO_FT3


def ft3_to_bbl(volume: float) -> float:
    return volume / BBL_TO_FT3
