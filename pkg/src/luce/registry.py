"""The Yellow Pages: dataset metadata profiles, publication, and keyword query.

Profiles follow a simplified regulatory-metadata layout: a header describing
the data, a permissions section (allowed reuse purposes), a terms section
(license reference, jurisdiction), and over-arching meta-conditions.
Publishing a profile atomically creates the dataset's contract.

Profile file format: flat ``key = value`` lines, ``#`` comments. The
``purposes`` value is a ``;``-separated list of ``tag`` or ``tag: detail``.
See `render_profile` for the canonical field order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .contract import ContractEngine
from .errors import DuplicateProfileId, InvalidProfile, InvalidTerms, UnknownTarget
from .license import WorkProperties, decode_license, is_valid_code, validate_work_properties

PURPOSE_VOCABULARY = (
    "general-research",
    "disease-specific",
    "method-development",
    "commercial",
)

MAX_PURPOSE_DETAIL = 512


@dataclass(frozen=True, slots=True)
class PurposeTag:
    tag: str
    detail: str = ""


def validate_purpose(purpose: PurposeTag) -> None:
    if purpose.tag not in PURPOSE_VOCABULARY:
        raise InvalidProfile(f"purpose tag {purpose.tag!r} is not in the controlled vocabulary")
    if len(purpose.detail) > MAX_PURPOSE_DETAIL:
        raise InvalidProfile(f"purpose detail exceeds {MAX_PURPOSE_DETAIL} characters")


@dataclass(frozen=True, slots=True)
class ProfileHeader:
    profile_id: str
    created_at: int
    data_description: str
    provider_name: str


@dataclass(frozen=True, slots=True)
class ProfilePermissions:
    allowed_purposes: tuple[PurposeTag, ...]


@dataclass(frozen=True, slots=True)
class ProfileTerms:
    license_ref: int | None = None
    jurisdiction: str | None = None


@dataclass(frozen=True, slots=True)
class ProfileMetaConditions:
    contains_personal_data: bool = True


@dataclass(frozen=True, slots=True)
class AdamProfile:
    header: ProfileHeader
    permissions: ProfilePermissions
    terms: ProfileTerms
    meta_conditions: ProfileMetaConditions
    work: WorkProperties | None = None


def validate_profile(profile: AdamProfile) -> None:
    if not profile.header.profile_id:
        raise InvalidProfile("profile id must be non-empty")
    if profile.meta_conditions.contains_personal_data and not profile.permissions.allowed_purposes:
        raise InvalidProfile("profiles for personal data must allow at least one reuse purpose")
    for purpose in profile.permissions.allowed_purposes:
        validate_purpose(purpose)


@dataclass(frozen=True, slots=True)
class YellowPageEntry:
    dataset_id: str
    profile: AdamProfile
    license_type: int
    provider_name: str
    contract_address: str


class YellowPages:
    """Shared directory where providers list datasets and requesters search."""

    def __init__(self, engine: ContractEngine):
        self.engine = engine
        self.entries: dict[str, YellowPageEntry] = {}

    def publish_profile(self, provider: str, profile: AdamProfile, license_code: int,
                        period_T: int = 10, link: str | None = None) -> str:
        """List a dataset and create its contract in one step; returns the dataset id."""
        validate_profile(profile)
        dataset_id = profile.header.profile_id
        if dataset_id in self.entries:
            raise DuplicateProfileId(f"profile id {dataset_id!r} is already listed")
        if is_valid_code(license_code):
            try:
                validate_work_properties(profile.work, decode_license(license_code))
            except InvalidTerms as exc:
                raise InvalidProfile(str(exc)) from exc
        address = self.engine.publish_dataset(
            provider=provider,
            description=profile.header.data_description,
            link=link or f"repo://{provider}/{dataset_id}",
            license_code=license_code,
            period_T=period_T,
            dataset_id=dataset_id,
        )
        self.entries[dataset_id] = YellowPageEntry(
            dataset_id=dataset_id,
            profile=profile,
            license_type=license_code,
            provider_name=profile.header.provider_name,
            contract_address=address,
        )
        return dataset_id

    def get(self, dataset_id: str) -> YellowPageEntry:
        entry = self.entries.get(dataset_id)
        if entry is None:
            raise UnknownTarget(f"no dataset listed under {dataset_id!r}")
        return entry

    def query(self, keywords: list[str]) -> list[YellowPageEntry]:
        """Entries whose description or purpose details contain every keyword.

        Matching is conjunctive, case-insensitive substring; an empty keyword
        list matches everything. Results are ordered by dataset id.
        """
        needles = [k.lower() for k in keywords]
        hits = []
        for dataset_id in sorted(self.entries):
            entry = self.entries[dataset_id]
            haystack = " ".join(
                [entry.profile.header.data_description]
                + [f"{p.tag} {p.detail}" for p in entry.profile.permissions.allowed_purposes]
            ).lower()
            if all(needle in haystack for needle in needles):
                hits.append(entry)
        return hits


# -- profile file format -----------------------------------------------------


def _parse_purposes(value: str) -> tuple[PurposeTag, ...]:
    purposes = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        tag, _, detail = chunk.partition(":")
        purposes.append(PurposeTag(tag.strip(), detail.strip()))
    return tuple(purposes)


_BOOL_VALUES = {"true": True, "false": False, "yes": True, "no": False}


def parse_profile(text: str) -> AdamProfile:
    fields: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InvalidProfile(f"profile line {line_no}: expected 'key = value', got {raw!r}")
        fields[key.strip()] = value.strip()

    def require(key: str) -> str:
        if key not in fields:
            raise InvalidProfile(f"profile is missing required field {key!r}")
        return fields[key]

    personal_raw = fields.get("personal-data", "true").lower()
    if personal_raw not in _BOOL_VALUES:
        raise InvalidProfile(f"personal-data must be true/false, got {personal_raw!r}")
    try:
        created_at = int(fields.get("created-at", "0"))
    except ValueError as exc:
        raise InvalidProfile("created-at must be an integer tick") from exc
    license_ref: int | None = None
    if fields.get("license-ref"):
        try:
            license_ref = int(fields["license-ref"])
        except ValueError as exc:
            raise InvalidProfile("license-ref must be an integer code") from exc
    work = None
    if any(fields.get(k) for k in ("title", "attribution-name", "attribution-url")):
        work = WorkProperties(
            title=fields.get("title", ""),
            attribution_name=fields.get("attribution-name", ""),
            attribution_url=fields.get("attribution-url", ""),
            work_type=fields.get("work-type", "dataset"),
            source_url=fields.get("source-url") or None,
            more_permissions_url=fields.get("more-permissions-url") or None,
        )
    profile = AdamProfile(
        header=ProfileHeader(
            profile_id=require("profile-id"),
            created_at=created_at,
            data_description=require("description"),
            provider_name=require("provider"),
        ),
        permissions=ProfilePermissions(_parse_purposes(fields.get("purposes", ""))),
        terms=ProfileTerms(license_ref=license_ref, jurisdiction=fields.get("jurisdiction") or None),
        meta_conditions=ProfileMetaConditions(_BOOL_VALUES[personal_raw]),
        work=work,
    )
    validate_profile(profile)
    return profile


def render_profile(profile: AdamProfile) -> str:
    purposes = "; ".join(
        f"{p.tag}: {p.detail}" if p.detail else p.tag
        for p in profile.permissions.allowed_purposes
    )
    lines = [
        f"profile-id = {profile.header.profile_id}",
        f"created-at = {profile.header.created_at}",
        f"description = {profile.header.data_description}",
        f"provider = {profile.header.provider_name}",
        f"purposes = {purposes}",
        f"personal-data = {'true' if profile.meta_conditions.contains_personal_data else 'false'}",
    ]
    if profile.terms.license_ref is not None:
        lines.append(f"license-ref = {profile.terms.license_ref}")
    if profile.terms.jurisdiction:
        lines.append(f"jurisdiction = {profile.terms.jurisdiction}")
    if profile.work is not None:
        lines.extend([
            f"title = {profile.work.title}",
            f"attribution-name = {profile.work.attribution_name}",
            f"attribution-url = {profile.work.attribution_url}",
            f"work-type = {profile.work.work_type}",
        ])
        if profile.work.source_url:
            lines.append(f"source-url = {profile.work.source_url}")
        if profile.work.more_permissions_url:
            lines.append(f"more-permissions-url = {profile.work.more_permissions_url}")
    return "\n".join(lines) + "\n"
