"""The 11 cloud classes of the CCSN layout, in class-index order."""

from typing import Dict, List, NamedTuple


class CloudClass(NamedTuple):
    name: str
    abbreviation: str


CLASS_TABLE: List[CloudClass] = [
    CloudClass("Altocumulus", "Ac"),
    CloudClass("Altostratus", "As"),
    CloudClass("Cumulonimbus", "Cb"),
    CloudClass("Cirrocumulus", "Cc"),
    CloudClass("Cirrus", "Ci"),
    CloudClass("Cirrostratus", "Cs"),
    CloudClass("Contrail", "Ct"),
    CloudClass("Cumulus", "Cu"),
    CloudClass("Nimbostratus", "Ns"),
    CloudClass("Stratocumulus", "Sc"),
    CloudClass("Stratus", "St"),
]

NUM_CLASSES = len(CLASS_TABLE)
ABBREVIATIONS = [c.abbreviation for c in CLASS_TABLE]
CLASS_INDEX: Dict[str, int] = {abbr: i for i, abbr in enumerate(ABBREVIATIONS)}

# Sample counts of the public CCSN release (2543 images in total).
CCSN_COUNTS: Dict[str, int] = {
    "Ac": 221, "As": 188, "Cb": 242, "Cc": 268, "Ci": 139, "Cs": 287,
    "Ct": 200, "Cu": 182, "Ns": 274, "Sc": 340, "St": 202,
}

CCSN_URL = "https://github.com/upuil/CCSN-Database"
