"""Propositional rule extraction from trained machines.

Each clause of a machine is a conjunction of literals; collecting the
positive-polarity clauses of an arm's machine gives a single DNF
expression summarizing when that arm looks attractive.  Rendering follows
the 1-based x1..xB naming of the binarized context, with literals and
terms ordered lexicographically by variable name so output is stable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tm import TsetlinMachine, as_bit_vector

__all__ = [
    "DnfExpression",
    "dnf_eval",
    "extract_arm_dnf",
    "render_dnf",
    "simplify_dnf",
]

# A literal is (feature bit index, negated flag); a term is a frozenset of them.
Literal = tuple[int, bool]


@dataclass(frozen=True)
class DnfExpression:
    """Disjunction of conjunctive terms over binary context features."""

    terms: tuple[frozenset, ...]
    num_features: int

    def __len__(self):
        return len(self.terms)

    def literal_lists(self) -> list[list[str]]:
        """Terms as sorted literal-name lists, for JSON output."""
        return [[_literal_name(lit) for lit in _sorted_literals(term)] for term in _sorted_terms(self.terms)]


def _literal_name(lit: Literal) -> str:
    index, negated = lit
    return ("¬" if negated else "") + f"x{index + 1}"


def _sorted_literals(term) -> list[Literal]:
    return sorted(term, key=lambda lit: (f"x{lit[0] + 1}", lit[1]))


def _sorted_terms(terms):
    def key(term):
        lits = _sorted_literals(term)
        return (len(lits) > 1, tuple(f"x{i + 1}" for i, _ in lits), tuple(neg for _, neg in lits))

    return sorted(terms, key=key)


def extract_arm_dnf(tm: TsetlinMachine, polarity: str = "positive") -> DnfExpression:
    """Collect one polarity's clauses as a simplified DNF.

    Literal indices above the feature count are folded back into negated
    features.  Empty clauses are dropped; the result is deduplicated and
    absorption-reduced.
    """
    if polarity not in ("positive", "negative"):
        raise ValueError(f"polarity must be 'positive' or 'negative', got {polarity!r}")
    start = 0 if polarity == "positive" else 1
    o = tm.config.num_features
    terms = []
    for j in range(start, tm.config.num_clauses, 2):
        included = tm.clause_literals(j)
        if not included:
            continue
        term = frozenset((k, False) if k < o else (k - o, True) for k in included)
        terms.append(term)
    return simplify_dnf(DnfExpression(tuple(terms), o))


def simplify_dnf(expr: DnfExpression) -> DnfExpression:
    """Drop duplicate, contradictory, and absorbed terms.

    A term containing both x and not-x can never hold; a term that is a
    superset of another term is implied by it.  Nothing else is rewritten,
    so the truth table is preserved and the operation is idempotent.
    """
    unique = set(expr.terms)
    consistent = {
        term for term in unique if not any((idx, not neg) in term for idx, neg in term)
    }
    kept = [term for term in consistent if not any(other < term for other in consistent)]
    return DnfExpression(tuple(_sorted_terms(kept)), expr.num_features)


def dnf_eval(expr: DnfExpression, bits) -> int:
    """1 iff some term's literals all hold in the sample."""
    bits = as_bit_vector(bits)
    for term in expr.terms:
        for index, negated in term:
            if index >= bits.size:
                raise IndexError(f"literal x{index + 1} out of range for width {bits.size}")
        if all(bits[index] == (0 if negated else 1) for index, negated in term):
            return 1
    return 0


def render_dnf(expr: DnfExpression) -> str:
    """Deterministic text form: '(x1 ∧ ¬x2) ∨ x3', '⊥' when empty.

    Single-literal terms print bare, longer ones parenthesized; terms are
    ordered single-literal first, then by variable names.
    """
    if not expr.terms:
        return "⊥"
    rendered = []
    for term in _sorted_terms(expr.terms):
        lits = [_literal_name(lit) for lit in _sorted_literals(term)]
        if len(lits) == 0:
            rendered.append("⊤")
        elif len(lits) == 1:
            rendered.append(lits[0])
        else:
            rendered.append("(" + " ∧ ".join(lits) + ")")
    return " ∨ ".join(rendered)


def positive_clause_disjunction(tm: TsetlinMachine, bits) -> int:
    """Reference evaluation: OR of the positive clauses' inference outputs."""
    out = tm.clause_outputs(bits, training=False)
    return int(out[0::2].any())
