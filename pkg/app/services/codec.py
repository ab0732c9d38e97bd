"""
Byte layouts of the SDN control messages. Every field has a fixed width,
all integers big-endian:

    CJOIN  kind u8 | node u16                                        3 bytes
    CACK   kind u8 | node u16                                        3 bytes
    CONF   kind u8 | nsu_period u16 | flow_lifetime u16              5 bytes
    NSU    kind u8 | node u16 | energy u16 | queue u8 | counts u8
           | neighbors (node u16, estimate u8)*
           | entry stats (entry u16, hits u8)*                 7 + 3n + 3m
    FTQ    kind u8 | node u16 | seq u16 | header prefix              5 + p
    FTS    kind u8 | entry count u8 | entries* | refresh count u8 | ids u16*
      entry  id u16 | lifetime u16 | match count u8
             | (offset u8, length u8, value, mask)* | action u8 | args
      args   forward: next hop u16; srh_push: count u8 + hops u16*; drop/query: none

The NSU counts byte packs the neighbor count in the low 5 bits and the entry
stat count in the high 3 bits.
"""
import struct

from app.models.schedule import PAYLOAD_BUDGET
from app.schemas.messages import (
    ActionSpec,
    Cack,
    Cjoin,
    Conf,
    EntryStat,
    FlowEntrySpec,
    Fts,
    Ftq,
    MatchSpec,
    NeighborReport,
    Nsu,
)

KIND_NSU = 1
KIND_FTQ = 2
KIND_FTS = 3
KIND_CJOIN = 4
KIND_CACK = 5
KIND_CONF = 6

MAX_NSU_NEIGHBORS = 0x1F
MAX_NSU_ENTRY_STATS = 0x07

_ACTION_CODES = {"forward": 1, "drop": 2, "srh_push": 3, "query": 4}
_ACTION_KINDS = {v: k for k, v in _ACTION_CODES.items()}

_HEAD_ID = struct.Struct(">BH")
_CONF = struct.Struct(">BHH")
_NSU_HEAD = struct.Struct(">BHHBB")
_PAIR = struct.Struct(">HB")
_FTQ_HEAD = struct.Struct(">BHH")
_U8 = struct.Struct(">B")
_U16 = struct.Struct(">H")
_ENTRY_HEAD = struct.Struct(">HHB")
_MATCH_HEAD = struct.Struct(">BB")

Message = Cjoin | Cack | Conf | Nsu | Ftq | Fts


class CodecError(ValueError):
    pass


def fit_nsu(msg: Nsu, budget: int = PAYLOAD_BUDGET) -> Nsu:
    """Truncate the neighbor list (then entry stats) until the NSU fits the budget."""
    neighbors = msg.neighbors[:MAX_NSU_NEIGHBORS]
    stats = msg.entry_stats[:MAX_NSU_ENTRY_STATS]
    while _NSU_HEAD.size + _PAIR.size * (len(neighbors) + len(stats)) > budget:
        if neighbors:
            neighbors = neighbors[:-1]
        elif stats:
            stats = stats[:-1]
        else:
            break
    if len(neighbors) == len(msg.neighbors) and len(stats) == len(msg.entry_stats):
        return msg
    return msg.model_copy(update={"neighbors": neighbors, "entry_stats": stats})


def encode_message(msg: Message, budget: int = PAYLOAD_BUDGET) -> bytes:
    match msg:
        case Cjoin():
            data = _HEAD_ID.pack(KIND_CJOIN, msg.node_id)
        case Cack():
            data = _HEAD_ID.pack(KIND_CACK, msg.node_id)
        case Conf():
            data = _CONF.pack(KIND_CONF, msg.nsu_period, msg.flow_lifetime)
        case Nsu():
            data = _encode_nsu(fit_nsu(msg, budget))
        case Ftq():
            data = _FTQ_HEAD.pack(KIND_FTQ, msg.node_id, msg.seq) + msg.header
        case Fts():
            data = _encode_fts(msg)
        case _:
            raise CodecError(f"cannot encode {type(msg).__name__}")
    if len(data) > budget:
        raise CodecError(f"{msg.kind} encodes to {len(data)} bytes, over the {budget}-byte payload budget")
    return data


def message_size(msg: Message, budget: int = PAYLOAD_BUDGET) -> int:
    return len(encode_message(msg, budget))


def _encode_nsu(msg: Nsu) -> bytes:
    counts = (len(msg.entry_stats) << 5) | len(msg.neighbors)
    parts = [_NSU_HEAD.pack(KIND_NSU, msg.node_id, msg.energy, msg.queue, counts)]
    parts += [_PAIR.pack(n.node_id, n.link_estimate) for n in msg.neighbors]
    parts += [_PAIR.pack(s.entry_id, s.hits) for s in msg.entry_stats]
    return b"".join(parts)


def _encode_fts(msg: Fts) -> bytes:
    if len(msg.entries) > 0xFF or len(msg.refresh_ids) > 0xFF:
        raise CodecError("FTS carries at most 255 entries and 255 refresh ids")
    parts = [_U8.pack(KIND_FTS), _U8.pack(len(msg.entries))]
    for entry in msg.entries:
        if len(entry.matches) > 0xFF:
            raise CodecError("a flow entry carries at most 255 matches")
        parts.append(_ENTRY_HEAD.pack(entry.entry_id, entry.lifetime, len(entry.matches)))
        for m in entry.matches:
            parts.append(_MATCH_HEAD.pack(m.offset, len(m.value)) + m.value + m.mask)
        action = entry.action
        parts.append(_U8.pack(_ACTION_CODES[action.kind]))
        if action.kind == "forward":
            parts.append(_U16.pack(action.next_hop))
        elif action.kind == "srh_push":
            if len(action.route) > 0xFF:
                raise CodecError("source route longer than 255 hops")
            parts.append(_U8.pack(len(action.route)))
            parts += [_U16.pack(hop) for hop in action.route]
    parts.append(_U8.pack(len(msg.refresh_ids)))
    parts += [_U16.pack(i) for i in msg.refresh_ids]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def unpack(self, layout: struct.Struct) -> tuple:
        try:
            values = layout.unpack_from(self.data, self.pos)
        except struct.error as e:
            raise CodecError(f"truncated message at byte {self.pos}: {e}") from None
        self.pos += layout.size
        return values

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CodecError(f"truncated message: need {n} bytes at {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def rest(self) -> bytes:
        return self.take(len(self.data) - self.pos)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CodecError(f"{len(self.data) - self.pos} trailing bytes")


def decode_message(data: bytes) -> Message:
    if not data:
        raise CodecError("empty message")
    reader = _Reader(bytes(data))
    kind = data[0]
    try:
        if kind in (KIND_CJOIN, KIND_CACK):
            _, node = reader.unpack(_HEAD_ID)
            msg = Cjoin(node_id=node) if kind == KIND_CJOIN else Cack(node_id=node)
        elif kind == KIND_CONF:
            _, period, lifetime = reader.unpack(_CONF)
            msg = Conf(nsu_period=period, flow_lifetime=lifetime)
        elif kind == KIND_NSU:
            msg = _decode_nsu(reader)
        elif kind == KIND_FTQ:
            _, node, seq = reader.unpack(_FTQ_HEAD)
            msg = Ftq(node_id=node, seq=seq, header=reader.rest())
        elif kind == KIND_FTS:
            msg = _decode_fts(reader)
        else:
            raise CodecError(f"unknown message kind {kind}")
    except ValueError as e:
        if isinstance(e, CodecError):
            raise
        raise CodecError(f"malformed message: {e}") from None
    reader.done()
    return msg


def _decode_nsu(reader: _Reader) -> Nsu:
    _, node, energy, queue, counts = reader.unpack(_NSU_HEAD)
    neighbors = [NeighborReport(node_id=n, link_estimate=q) for n, q in (reader.unpack(_PAIR) for _ in range(counts & 0x1F))]
    stats = [EntryStat(entry_id=e, hits=h) for e, h in (reader.unpack(_PAIR) for _ in range(counts >> 5))]
    return Nsu(node_id=node, energy=energy, queue=queue, neighbors=neighbors, entry_stats=stats)


def _decode_fts(reader: _Reader) -> Fts:
    reader.unpack(_U8)
    (count,) = reader.unpack(_U8)
    entries = []
    for _ in range(count):
        entry_id, lifetime, n_matches = reader.unpack(_ENTRY_HEAD)
        matches = []
        for _ in range(n_matches):
            offset, length = reader.unpack(_MATCH_HEAD)
            matches.append(MatchSpec(offset=offset, value=reader.take(length), mask=reader.take(length)))
        (code,) = reader.unpack(_U8)
        if code not in _ACTION_KINDS:
            raise CodecError(f"unknown action code {code}")
        kind = _ACTION_KINDS[code]
        if kind == "forward":
            (hop,) = reader.unpack(_U16)
            action = ActionSpec(kind=kind, next_hop=hop)
        elif kind == "srh_push":
            (hops,) = reader.unpack(_U8)
            action = ActionSpec(kind=kind, route=[reader.unpack(_U16)[0] for _ in range(hops)])
        else:
            action = ActionSpec(kind=kind)
        entries.append(FlowEntrySpec(entry_id=entry_id, lifetime=lifetime, matches=matches, action=action))
    (n_refresh,) = reader.unpack(_U8)
    refresh_ids = [reader.unpack(_U16)[0] for _ in range(n_refresh)]
    return Fts(entries=entries, refresh_ids=refresh_ids)
