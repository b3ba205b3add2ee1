"""Medical term lexicon and dictionary matching over normalized tokens"""

from dataclasses import dataclass, field
from enum import Enum
import logging

from asr_ward.errors import FormatError, IoError
from asr_ward.textnorm import Token, normalize

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)


class SemanticGroup(str, Enum):
    CHEMICALS_AND_DRUGS = "ChemicalsAndDrugs"
    DISORDERS = "Disorders"
    PROCEDURES = "Procedures"
    ANATOMY = "Anatomy"
    PHYSIOLOGY = "Physiology"
    OTHER = "Other"


# Groups that get their own rows in error reports
REPORTED_GROUPS = [
    SemanticGroup.CHEMICALS_AND_DRUGS,
    SemanticGroup.DISORDERS,
    SemanticGroup.PROCEDURES,
    SemanticGroup.ANATOMY,
    SemanticGroup.PHYSIOLOGY,
]

_GROUP_BY_NAME = {group.value.lower(): group for group in SemanticGroup}


@dataclass(frozen=True)
class TermHit:
    term: str
    group: SemanticGroup
    start: int
    len: int

    def __post_init__(self):
        if self.start < 0 or self.len < 1:
            raise ValueError(f"Invalid term hit span ({self.start}, {self.len})")


@dataclass
class Lexicon:
    entries: dict[str, SemanticGroup] = field(default_factory=dict)
    # Longest term in tokens, kept current by `add`
    max_ngram: int = field(default=1, init=False)

    def __post_init__(self):
        for term in self.entries:
            self.max_ngram = max(self.max_ngram, len(term.split(" ")))

    def __contains__(self, term: str) -> bool:
        return term in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_terms(cls, terms: dict[str, SemanticGroup | str]) -> "Lexicon":
        """Build a lexicon from surface terms, normalizing each key"""
        lexicon = cls()
        for surface, group in terms.items():
            lexicon.add(surface, SemanticGroup(group))
        return lexicon

    def add(self, surface: str, group: SemanticGroup) -> bool:
        key = normalize_term(surface)
        if not key:
            return False
        if key in self.entries:
            logger.warning(
                f"Duplicate lexicon term {surface!r} ({key}), "
                f"keeping group {self.entries[key].value}"
            )
            return False
        self.entries[key] = group
        self.max_ngram = max(self.max_ngram, len(key.split(" ")))
        return True


def normalize_term(surface: str) -> str:
    return " ".join(token.norm for token in normalize(surface))


def parse_group(name: str) -> SemanticGroup:
    group = _GROUP_BY_NAME.get(name.strip().lower())
    if group is None:
        logger.warning(f"Unknown semantic group {name!r}, using Other")
        return SemanticGroup.OTHER
    return group


def load_lexicon(path: str) -> Lexicon:
    """Read a `term<TAB>group` file. Blank lines and `#` comments are skipped."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise IoError(f"Cannot read lexicon {path}: {e}")
    except UnicodeDecodeError as e:
        raise FormatError(f"Lexicon {path} is not UTF-8: {e}")

    lexicon = Lexicon()
    for line_number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 2:
            raise FormatError(
                f"expected 2 tab-separated columns, got {len(columns)}",
                line=line_number,
            )
        surface, group_name = columns
        if not surface.strip():
            raise FormatError("empty term", line=line_number)
        lexicon.add(surface, parse_group(group_name))

    logger.info(f"Loaded {len(lexicon)} lexicon terms from {path}")
    return lexicon


def find_terms(tokens: list[Token], lex: Lexicon) -> list[TermHit]:
    """Greedy longest-match scan, hits never overlap"""
    norms = [token.norm for token in tokens]
    max_ngram = lex.max_ngram
    hits = []
    i = 0
    while i < len(norms):
        for n in range(min(max_ngram, len(norms) - i), 0, -1):
            candidate = " ".join(norms[i : i + n])
            if candidate in lex.entries:
                hits.append(TermHit(candidate, lex.entries[candidate], i, n))
                i += n
                break
        else:
            i += 1
    return hits


def contains_term(norms: list[str], term: str) -> bool:
    """Whether `term` occurs as a contiguous run of `norms`"""
    term_norms = term.split(" ")
    n = len(term_norms)
    return any(norms[i : i + n] == term_norms for i in range(len(norms) - n + 1))
