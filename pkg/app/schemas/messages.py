"""SDN control messages exchanged between nodes and the controller."""
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.flowtable import Drop, FlowAction, FlowMatch, Forward, Query, SrhPush

U8 = Annotated[int, Field(ge=0, le=0xFF)]
U16 = Annotated[int, Field(ge=0, le=0xFFFF)]


class _Message(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_bytes="base64", val_json_bytes="base64")


class NeighborReport(_Message):
    node_id: U16
    link_estimate: U8


class EntryStat(_Message):
    entry_id: U16
    hits: U8


class Cjoin(_Message):
    """Node -> controller: request to join the SDN network."""

    kind: Literal["CJOIN"] = "CJOIN"
    node_id: U16


class Cack(_Message):
    kind: Literal["CACK"] = "CACK"
    node_id: U16


class Conf(_Message):
    """Controller -> node: timers the node must run with."""

    kind: Literal["CONF"] = "CONF"
    nsu_period: U16
    flow_lifetime: U16


class Nsu(_Message):
    """Node -> controller: periodic node state update."""

    kind: Literal["NSU"] = "NSU"
    node_id: U16
    energy: U16
    queue: U8
    neighbors: list[NeighborReport] = Field(default_factory=list)
    entry_stats: list[EntryStat] = Field(default_factory=list)


class Ftq(_Message):
    """Node -> controller: flowtable miss, carrying only a header prefix."""

    kind: Literal["FTQ"] = "FTQ"
    node_id: U16
    seq: U16
    header: bytes = Field(max_length=0xFF)


class MatchSpec(_Message):
    offset: U8
    value: bytes = Field(min_length=1, max_length=0xFF)
    mask: bytes = Field(min_length=1, max_length=0xFF)

    @model_validator(mode="after")
    def _same_width(self) -> "MatchSpec":
        if len(self.value) != len(self.mask):
            raise ValueError("match value and mask differ in length")
        return self

    @classmethod
    def from_match(cls, match: FlowMatch) -> "MatchSpec":
        return cls(offset=match.offset, value=match.value, mask=match.mask)

    def to_match(self) -> FlowMatch:
        return FlowMatch(self.offset, len(self.value), self.value, self.mask)


class ActionSpec(_Message):
    kind: Literal["forward", "drop", "srh_push", "query"]
    next_hop: U16 | None = None
    route: list[U16] = Field(default_factory=list)

    @model_validator(mode="after")
    def _arguments(self) -> "ActionSpec":
        if self.kind == "forward" and self.next_hop is None:
            raise ValueError("forward needs next_hop")
        if self.kind == "srh_push" and not self.route:
            raise ValueError("srh_push needs a non-empty route")
        return self

    @classmethod
    def from_action(cls, action: FlowAction) -> "ActionSpec":
        match action:
            case Forward(next_hop=hop):
                return cls(kind="forward", next_hop=hop)
            case SrhPush(route=route):
                return cls(kind="srh_push", route=list(route))
            case Drop():
                return cls(kind="drop")
            case Query():
                return cls(kind="query")
        raise TypeError(f"unsupported action {action!r}")

    def to_action(self) -> FlowAction:
        if self.kind == "forward":
            return Forward(self.next_hop)
        if self.kind == "srh_push":
            return SrhPush(tuple(self.route))
        if self.kind == "drop":
            return Drop()
        return Query()


class FlowEntrySpec(_Message):
    entry_id: U16
    lifetime: U16
    matches: list[MatchSpec] = Field(min_length=1)
    action: ActionSpec


class Fts(_Message):
    """Controller -> node: flow entries to install and live entries to refresh."""

    kind: Literal["FTS"] = "FTS"
    entries: list[FlowEntrySpec] = Field(default_factory=list)
    refresh_ids: list[U16] = Field(default_factory=list)


SdnMessage = Annotated[Union[Cjoin, Cack, Conf, Nsu, Ftq, Fts], Field(discriminator="kind")]
