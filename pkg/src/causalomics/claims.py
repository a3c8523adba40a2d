"""Natural-language claims for graph edges that touch the target.

Every variable adjacent to the target becomes one sentence built from
its measurement family's template, together with the sentence's
negation.  Claims carry provenance describing the run that produced
the graph, and their ids are content hashes, so re-running the same
configuration yields the same ids.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field

from .graphs import MixedGraph
from .tabular import Family, VariableMeta

logger = logging.getLogger(__name__)

__all__ = [
    "Claim",
    "ClaimError",
    "Relation",
    "as_prompt",
    "claims_to_json_dict",
    "edges_to_claims",
]


class ClaimError(ValueError):
    """Invalid claim-generation input."""


class Relation(enum.Enum):
    """Sentence form a claim uses.

    ``RELATED_TO_SURVIVAL`` is the canonical form used for claim
    verification; ``AFFECTS_VITAL_STATUS`` is the shorter form used as
    a generation prompt.
    """

    RELATED_TO_SURVIVAL = "related_to_survival"
    AFFECTS_VITAL_STATUS = "affects_vital_status"


_FAMILY_PHRASES = {
    Family.MUTATION: "Mutation",
    Family.COPY_NUMBER: "Copy number variations",
    Family.PROTEIN_LEVEL: "Changes in protein levels",
    Family.GENE_EXPRESSION: "Change in gene expression",
}

# The prompt form uses the singular copy-number phrasing.
_PROMPT_PHRASES = dict(_FAMILY_PHRASES)
_PROMPT_PHRASES[Family.COPY_NUMBER] = "Copy number variation"


def _claim_id(relation: Relation, subject: str, text: str) -> str:
    digest = hashlib.sha256(
        f"{relation.value}|{subject}|{text}".encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class Claim:
    """One sentence about a variable's relation to the target, with its
    negation and the provenance of the graph edge behind it."""

    id: str
    subject: VariableMeta
    relation: Relation
    text: str
    negation_text: str
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "subject": self.subject.name,
            "family": self.subject.family.value,
            "text": self.text,
            "negation_text": self.negation_text,
            "provenance": dict(self.provenance),
        }


def _build_claim(meta: VariableMeta, relation: Relation,
                 provenance: dict) -> Claim:
    gene = meta.gene_symbol()
    if relation is Relation.RELATED_TO_SURVIVAL:
        phrase = _FAMILY_PHRASES[meta.family]
        text = f"{phrase} in gene {gene} is related to the survival in cancer"
        negation = (f"{phrase} in gene {gene} "
                    f"is not related to the survival in cancer")
    else:
        phrase = _PROMPT_PHRASES[meta.family]
        text = f"{phrase} in gene {gene} affects vital status"
        negation = f"{phrase} in gene {gene} does not affect vital status"
    return Claim(id=_claim_id(relation, meta.name, text), subject=meta,
                 relation=relation, text=text, negation_text=negation,
                 provenance=dict(provenance))


def edges_to_claims(graph: MixedGraph, target: str,
                    metas: list[VariableMeta],
                    provenance: dict | None = None) -> list[Claim]:
    """One claim per variable adjacent to the target, in column order.

    Orientation is ignored: any edge touching the target yields a
    claim.  Variables without a family template (the target itself,
    unprefixed columns) are skipped with a log message.
    """
    if target not in graph.nodes:
        raise ClaimError(f"target {target!r} not in the graph")
    by_name = {m.name: m for m in metas}
    order = {name: i for i, name in enumerate(by_name)}
    provenance = dict(provenance or {})
    neighbors = list(graph.adjacent(target))
    missing = sorted(n for n in neighbors if n not in by_name)
    if missing:
        raise ClaimError(f"no metadata for graph variables {missing}")
    claims = []
    for neighbor in sorted(neighbors, key=order.get):
        meta = by_name[neighbor]
        if meta.family not in _FAMILY_PHRASES:
            logger.info("no claim template for %r (family %s); skipping",
                        neighbor, meta.family.value)
            continue
        claims.append(_build_claim(meta, Relation.RELATED_TO_SURVIVAL,
                                   provenance))
    return claims


def as_prompt(claim: Claim) -> Claim:
    """The same claim rephrased in the generation-prompt form."""
    return _build_claim(claim.subject, Relation.AFFECTS_VITAL_STATUS,
                        claim.provenance)


def claims_to_json_dict(claims: list[Claim]) -> dict:
    return {"claims": [c.to_json_dict() for c in claims]}
