"""License vocabulary, its 8-bit numeric encoding, and the action checker.

The vocabulary follows the machine-readable rights language used for data
licenses: what a license permits (reproduction, distribution, derivation),
prohibits (commercial use), and requires (notice, attribution, share-alike,
source code). Contracts store the compact integer code so that agreement is
an integer comparison rather than a string comparison.

Bit assignment (our own, fixed and documented):

    bit 0 (1)    permits Reproduction
    bit 1 (2)    permits Distribution
    bit 2 (4)    permits Derivation
    bit 3 (8)    prohibits CommercialUse
    bit 4 (16)   requires Notice
    bit 5 (32)   requires Attribution
    bit 6 (64)   requires ShareAlike       (only valid with bit 2)
    bit 7 (128)  requires SourceCode

The checker's decision table:

    Read            always compliant (access control is the token's job)
    Reproduce       Reproduction permitted
    Distribute      Distribution permitted, and the declared notice /
                    attribution flags satisfy the requirements
    Derive          Derivation permitted
    ShareDerivative Derivation permitted, distribution conditions hold, and
                    when ShareAlike is required the derivative carries the
                    identical license code
    CommercialUse   violation iff CommercialUse is prohibited

SourceCode is representable but never gates an action here: provision of
source accompanies artifacts the monitor cannot observe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidAction, InvalidCombination, InvalidTerms, OutOfRange


class Permission(str, Enum):
    REPRODUCTION = "reproduction"
    DISTRIBUTION = "distribution"
    DERIVATION = "derivation"


class Prohibition(str, Enum):
    COMMERCIAL_USE = "commercial-use"


class Requirement(str, Enum):
    NOTICE = "notice"
    ATTRIBUTION = "attribution"
    SHARE_ALIKE = "share-alike"
    SOURCE_CODE = "source-code"


BIT_REPRODUCTION = 1
BIT_DISTRIBUTION = 2
BIT_DERIVATION = 4
BIT_COMMERCIAL = 8
BIT_NOTICE = 16
BIT_ATTRIBUTION = 32
BIT_SHARE_ALIKE = 64
BIT_SOURCE_CODE = 128

#: permits all of reproduction/distribution/derivation, prohibits commercial
#: use, requires notice and attribution — the running example in the docs.
CC_BY_NC_CODE = 63


@dataclass(frozen=True, slots=True)
class LicenseTerms:
    """License semantics plus descriptive metadata.

    The url/jurisdiction fields describe where the legal text lives; they are
    not part of the encoded semantics and are excluded from equality, so
    decode(encode(terms)) == terms holds.
    """

    permits: frozenset[Permission] = frozenset()
    prohibits: frozenset[Prohibition] = frozenset()
    requires: frozenset[Requirement] = frozenset()
    legal_code_url: str = field(default="", compare=False)
    jurisdiction: str | None = field(default=None, compare=False)


def validate_terms(terms: LicenseTerms) -> None:
    if Requirement.SHARE_ALIKE in terms.requires and Permission.DERIVATION not in terms.permits:
        raise InvalidTerms("share-alike requires that derivation be permitted")


def encode_license(terms: LicenseTerms) -> int:
    """Pack terms into the 8-bit code; raises InvalidTerms on bad combinations."""
    validate_terms(terms)
    code = 0
    if Permission.REPRODUCTION in terms.permits:
        code |= BIT_REPRODUCTION
    if Permission.DISTRIBUTION in terms.permits:
        code |= BIT_DISTRIBUTION
    if Permission.DERIVATION in terms.permits:
        code |= BIT_DERIVATION
    if Prohibition.COMMERCIAL_USE in terms.prohibits:
        code |= BIT_COMMERCIAL
    if Requirement.NOTICE in terms.requires:
        code |= BIT_NOTICE
    if Requirement.ATTRIBUTION in terms.requires:
        code |= BIT_ATTRIBUTION
    if Requirement.SHARE_ALIKE in terms.requires:
        code |= BIT_SHARE_ALIKE
    if Requirement.SOURCE_CODE in terms.requires:
        code |= BIT_SOURCE_CODE
    return code


def decode_license(code: int) -> LicenseTerms:
    if not isinstance(code, int) or isinstance(code, bool) or not 0 <= code < 256:
        raise OutOfRange(f"license code must be an integer in [0, 256), got {code!r}")
    if code & BIT_SHARE_ALIKE and not code & BIT_DERIVATION:
        raise InvalidCombination("share-alike bit set without the derivation bit")
    permits = set()
    if code & BIT_REPRODUCTION:
        permits.add(Permission.REPRODUCTION)
    if code & BIT_DISTRIBUTION:
        permits.add(Permission.DISTRIBUTION)
    if code & BIT_DERIVATION:
        permits.add(Permission.DERIVATION)
    prohibits = {Prohibition.COMMERCIAL_USE} if code & BIT_COMMERCIAL else set()
    requires = set()
    if code & BIT_NOTICE:
        requires.add(Requirement.NOTICE)
    if code & BIT_ATTRIBUTION:
        requires.add(Requirement.ATTRIBUTION)
    if code & BIT_SHARE_ALIKE:
        requires.add(Requirement.SHARE_ALIKE)
    if code & BIT_SOURCE_CODE:
        requires.add(Requirement.SOURCE_CODE)
    return LicenseTerms(frozenset(permits), frozenset(prohibits), frozenset(requires))


def is_valid_code(code) -> bool:
    try:
        decode_license(code)
    except (OutOfRange, InvalidCombination):
        return False
    return True


# -- actions and verdicts ----------------------------------------------------


class ActionKind(str, Enum):
    READ = "read"
    REPRODUCE = "reproduce"
    DISTRIBUTE = "distribute"
    DERIVE = "derive"
    SHARE_DERIVATIVE = "share-derivative"
    COMMERCIAL_USE = "commercial-use"


@dataclass(frozen=True, slots=True)
class DataAction:
    kind: ActionKind
    carried_notice: bool = False
    carried_attribution: bool = False
    derivative_license: int | None = None


def validate_action(action: DataAction) -> None:
    needs_license = action.kind is ActionKind.SHARE_DERIVATIVE
    if needs_license and action.derivative_license is None:
        raise InvalidAction("share-derivative actions must declare the derivative's license code")
    if not needs_license and action.derivative_license is not None:
        raise InvalidAction(f"{action.kind.value} actions carry no derivative license")


VERDICT_OK = "ok"
VERDICT_VIOLATION = "violation"
VERDICT_ATTESTED = "attested"


@dataclass(frozen=True, slots=True)
class Verdict:
    status: str
    reason: str = ""

    @property
    def compliant(self) -> bool:
        return self.status != VERDICT_VIOLATION

    @classmethod
    def ok(cls) -> "Verdict":
        return cls(VERDICT_OK)

    @classmethod
    def violation(cls, reason: str) -> "Verdict":
        return cls(VERDICT_VIOLATION, reason)

    @classmethod
    def attested(cls) -> "Verdict":
        return cls(VERDICT_ATTESTED, "self-declared")


REASON_REPRODUCTION = "reproduction not permitted"
REASON_DISTRIBUTION = "distribution not permitted"
REASON_NOTICE = "notice required but not carried"
REASON_ATTRIBUTION = "attribution required but not carried"
REASON_DERIVATION = "derivation not permitted"
REASON_SHARE_ALIKE = "share-alike requires the identical license on the derivative"
REASON_COMMERCIAL = "commercial use prohibited"


def _distribution_fault(action: DataAction, terms: LicenseTerms) -> str | None:
    if Permission.DISTRIBUTION not in terms.permits:
        return REASON_DISTRIBUTION
    if Requirement.NOTICE in terms.requires and not action.carried_notice:
        return REASON_NOTICE
    if Requirement.ATTRIBUTION in terms.requires and not action.carried_attribution:
        return REASON_ATTRIBUTION
    return None


def check_action(action: DataAction, terms: LicenseTerms) -> Verdict:
    """Decide whether a declared action complies with the license terms."""
    validate_action(action)
    kind = action.kind
    if kind is ActionKind.READ:
        return Verdict.ok()
    if kind is ActionKind.REPRODUCE:
        if Permission.REPRODUCTION not in terms.permits:
            return Verdict.violation(REASON_REPRODUCTION)
        return Verdict.ok()
    if kind is ActionKind.DISTRIBUTE:
        fault = _distribution_fault(action, terms)
        return Verdict.violation(fault) if fault else Verdict.ok()
    if kind is ActionKind.DERIVE:
        if Permission.DERIVATION not in terms.permits:
            return Verdict.violation(REASON_DERIVATION)
        return Verdict.ok()
    if kind is ActionKind.SHARE_DERIVATIVE:
        if Permission.DERIVATION not in terms.permits:
            return Verdict.violation(REASON_DERIVATION)
        fault = _distribution_fault(action, terms)
        if fault:
            return Verdict.violation(fault)
        if Requirement.SHARE_ALIKE in terms.requires and action.derivative_license != encode_license(terms):
            return Verdict.violation(REASON_SHARE_ALIKE)
        return Verdict.ok()
    if kind is ActionKind.COMMERCIAL_USE:
        if Prohibition.COMMERCIAL_USE in terms.prohibits:
            return Verdict.violation(REASON_COMMERCIAL)
        return Verdict.ok()
    raise InvalidAction(f"unknown action kind {kind!r}")


# -- work properties ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class WorkProperties:
    """Descriptive properties of the licensed work (who to credit, and how)."""

    title: str = ""
    attribution_name: str = ""
    attribution_url: str = ""
    work_type: str = "dataset"
    source_url: str | None = None
    more_permissions_url: str | None = None


def validate_work_properties(work: WorkProperties | None, terms: LicenseTerms) -> None:
    """Attribution-requiring licenses need a non-empty title and credit name."""
    if Requirement.ATTRIBUTION not in terms.requires:
        return
    if work is None:
        raise InvalidTerms("license requires attribution but no work properties were given")
    if not work.title or not work.attribution_name:
        raise InvalidTerms("license requires attribution: title and attribution name must be non-empty")


def render_deed(code: int) -> str:
    """Three-section human-readable summary of a license code."""
    terms = decode_license(code)
    lines = [f"license code {code}"]
    permits = sorted(p.value for p in terms.permits)
    prohibits = sorted(p.value for p in terms.prohibits)
    requires = sorted(r.value for r in terms.requires)
    lines.append("  permits:   " + (", ".join(permits) if permits else "(nothing)"))
    lines.append("  prohibits: " + (", ".join(prohibits) if prohibits else "(nothing)"))
    lines.append("  requires:  " + (", ".join(requires) if requires else "(nothing)"))
    return "\n".join(lines)
