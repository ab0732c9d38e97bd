"""Scenario schema; defaults reproduce the reference evaluation setup."""
import enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.schedule import PAYLOAD_BUDGET


class Mode(str, enum.Enum):
    NO_SDN_RPL = "NoSdnRpl"
    SDN_SHARED = "SdnShared"
    SDN_TRACKS = "SdnTracks"

    @property
    def sdn_enabled(self) -> bool:
        return self is not Mode.NO_SDN_RPL

    @property
    def tracks_enabled(self) -> bool:
        return self is Mode.SDN_TRACKS


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopologyParams(_Section):
    hop_count: int = Field(5, ge=1)
    spacing: float = Field(90.0, gt=0, description="metres between chain neighbours")
    tx_range: float = Field(100.0, gt=0)
    link_quality: float = Field(0.9, ge=0.0, le=1.0)


class TschParams(_Section):
    slot_duration: float = Field(10.0, gt=0, description="milliseconds per slot")
    slotframe_length: int = Field(61, ge=2, le=0xFFFF)
    channel_count: int = Field(16, ge=1)
    shared_slots: int = Field(4, ge=0)
    queue_capacity: int = Field(8, ge=1)
    max_retries: int = Field(4, ge=0)
    p_shared: float = Field(0.5, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _shared_fit(self) -> "TschParams":
        if self.shared_slots >= self.slotframe_length:
            raise ValueError(
                f"shared_slots ({self.shared_slots}) must be below slotframe_length ({self.slotframe_length})"
            )
        return self


class SdnParams(_Section):
    nsu_period: int = Field(10, ge=1, le=0xFFFF, description="seconds")
    flow_lifetime: int = Field(60, ge=1, le=0xFFFF, description="seconds")
    ppq_bytes: int = Field(24, ge=3, le=PAYLOAD_BUDGET - 5)
    flowtable_capacity: int = Field(10, ge=1)
    cmq_enabled: bool = True
    query_buffer: int = Field(4, ge=1)
    query_timeout: float = Field(15.0, gt=0)
    cjoin_retry_interval: float = Field(8.0, gt=0)
    cjoin_max_retries: int = Field(5, ge=0)
    afr_enabled: bool = False
    afr_hit_threshold: int = Field(5, ge=1)
    default_route_fallback: bool = Field(
        True, description="on a flowtable miss toward an ancestor, query the controller but forward along the default route"
    )


class TrackParams(_Section):
    bandwidth: int = Field(1, ge=1)
    hold_slotframes: int = Field(4, ge=1)
    track_retries: int = Field(3, ge=0)


class RplParams(_Section):
    route_lifetime: float = Field(600.0, gt=0)
    join_stagger: float = Field(10.0, ge=0, description="seconds of SDN join delay per DAG rank")


class AppParams(_Section):
    interval: tuple[float, float] = (5.0, 10.0)
    header_bytes: int = Field(60, ge=7)
    payload_bytes: int = Field(20, ge=0)

    @field_validator("interval", mode="before")
    @classmethod
    def parse_interval(cls, v: object) -> object:
        if isinstance(v, str):
            low, sep, high = v.partition("..")
            if not sep:
                raise ValueError(f"interval must look like 'min..max', got {v!r}")
            try:
                return (float(low), float(high))
            except ValueError:
                raise ValueError(f"interval bounds must be numeric, got {v!r}") from None
        return v

    @field_validator("interval")
    @classmethod
    def check_interval(cls, v: tuple[float, float]) -> tuple[float, float]:
        low, high = v
        if low <= 0:
            raise ValueError("interval lower bound must be positive")
        if low > high:
            raise ValueError(f"interval {low}..{high} is out of order (min > max)")
        return v

    @model_validator(mode="after")
    def _frame_budget(self) -> "AppParams":
        if self.header_bytes + self.payload_bytes > PAYLOAD_BUDGET:
            raise ValueError(
                f"header_bytes + payload_bytes = {self.header_bytes + self.payload_bytes} "
                f"exceeds the {PAYLOAD_BUDGET}-byte frame payload"
            )
        return self


class Scenario(_Section):
    mode: Mode
    seed: int = Field(1, ge=0)
    duration: float = Field(3600.0, gt=0, description="measured seconds after warm-up")
    audit: bool = False
    topology: TopologyParams = Field(default_factory=TopologyParams)
    tsch: TschParams = Field(default_factory=TschParams)
    sdn: SdnParams = Field(default_factory=SdnParams)
    track: TrackParams = Field(default_factory=TrackParams)
    rpl: RplParams = Field(default_factory=RplParams)
    app: AppParams = Field(default_factory=AppParams)

    @model_validator(mode="after")
    def _spacing_connects(self) -> "Scenario":
        if self.topology.spacing > self.topology.tx_range:
            raise ValueError(
                f"spacing {self.topology.spacing} m exceeds tx_range {self.topology.tx_range} m: chain is disconnected"
            )
        return self
