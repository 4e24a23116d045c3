"""Exact top-k cosine index over chunk embeddings, with a checksummed binary
persistence format. Flat scan: correctness-first at desk scale, and the search
contract leaves room for an approximate backend later."""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingVector

MAGIC = b"SPIDX\x00\x00\x01"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIQQ")  # magic, version, dim, count, metadata offset


class VectorIndexError(Exception):
    pass


class DimensionMismatchError(VectorIndexError):
    pass


class DuplicateChunkError(VectorIndexError):
    pass


class IndexFrozenError(VectorIndexError):
    pass


class IndexFormatError(VectorIndexError):
    pass


@dataclass(frozen=True)
class ChunkMetadata:
    paper_id: str
    title: str
    authors: tuple[str, ...]
    venue: str | None
    section_path: str


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    vector: EmbeddingVector
    metadata: ChunkMetadata


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    rank: int
    metadata: ChunkMetadata


class VectorIndex:
    """Vectors are quantized to float32 at add() time (the persisted record
    width), so in-memory and reloaded indices return bit-identical results."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self._ids: list[str] = []
        self._vectors: list[np.ndarray] = []
        self._meta: dict[str, ChunkMetadata] = {}
        self._positions: dict[str, int] = {}
        self._frozen = False
        self._matrix: np.ndarray | None = None
        self._norms: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._ids)

    def add(self, entry: IndexEntry) -> None:
        if self._frozen:
            raise IndexFrozenError("index is frozen; rebuild to add entries")
        if entry.vector.dim != self.dim:
            raise DimensionMismatchError(
                f"entry dim {entry.vector.dim} != index dim {self.dim}"
            )
        if entry.chunk_id in self._positions:
            raise DuplicateChunkError(f"duplicate chunk_id {entry.chunk_id!r}")
        self._positions[entry.chunk_id] = len(self._ids)
        self._ids.append(entry.chunk_id)
        self._vectors.append(np.asarray(entry.vector.values, dtype=np.float32))
        self._meta[entry.chunk_id] = entry.metadata
        self._matrix = None

    def get(self, chunk_id: str) -> IndexEntry | None:
        pos = self._positions.get(chunk_id)
        if pos is None:
            return None
        vec = self._vectors[pos]
        return IndexEntry(
            chunk_id=chunk_id,
            vector=EmbeddingVector(values=tuple(float(v) for v in vec), dim=self.dim),
            metadata=self._meta[chunk_id],
        )

    def freeze(self) -> None:
        self._frozen = True
        self._ensure_matrix()

    def _ensure_matrix(self) -> None:
        if self._matrix is None and self._vectors:
            self._matrix = np.vstack(self._vectors).astype(np.float64)
            self._norms = np.linalg.norm(self._matrix, axis=1)

    def search(self, query: EmbeddingVector, k: int) -> list[SearchHit]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if query.dim != self.dim:
            raise DimensionMismatchError(f"query dim {query.dim} != index dim {self.dim}")
        if not self._ids:
            return []
        self._ensure_matrix()
        q = np.asarray(query.values, dtype=np.float64)
        qn = np.linalg.norm(q)
        if qn == 0.0:
            raise VectorIndexError("cannot search with a zero-norm query")
        scores = (self._matrix @ q) / (self._norms * qn)
        np.clip(scores, -1.0, 1.0, out=scores)
        order = sorted(range(len(self._ids)), key=lambda i: (-scores[i], self._ids[i]))
        return [
            SearchHit(
                chunk_id=self._ids[i],
                score=float(scores[i]),
                rank=rank,
                metadata=self._meta[self._ids[i]],
            )
            for rank, i in enumerate(order[:k], start=1)
        ]

    def save(self, path: str | Path) -> None:
        if not self._ids:
            raise ValueError("refusing to save an empty index; save requires a non-empty index")
        path = Path(path)
        order = sorted(range(len(self._ids)), key=lambda i: self._ids[i])
        vec_block = b"".join(self._vectors[i].astype("<f4").tobytes() for i in order)
        meta_parts = []
        for i in order:
            cid = self._ids[i]
            m = self._meta[cid]
            record = json.dumps(
                {
                    "chunk_id": cid,
                    "paper_id": m.paper_id,
                    "title": m.title,
                    "authors": list(m.authors),
                    "venue": m.venue,
                    "section_path": m.section_path,
                },
                sort_keys=True,
                separators=(",", ":"),
                ensure_ascii=False,
            ).encode("utf-8")
            meta_parts.append(struct.pack("<I", len(record)) + record)
        meta_block = b"".join(meta_parts)
        header = _HEADER.pack(
            MAGIC, FORMAT_VERSION, self.dim, len(self._ids), _HEADER.size + len(vec_block)
        )
        body = header + vec_block + meta_block
        path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        blob = Path(path).read_bytes()
        if len(blob) < _HEADER.size + 4:
            raise IndexFormatError("truncated index file")
        magic, version, dim, count, meta_offset = _HEADER.unpack_from(blob, 0)
        if magic != MAGIC:
            raise IndexFormatError(f"bad magic bytes {magic!r}")
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported format version {version}")
        body, (crc_stored,) = blob[:-4], struct.unpack("<I", blob[-4:])
        if zlib.crc32(body) != crc_stored:
            raise IndexFormatError("checksum mismatch")
        expected_meta_offset = _HEADER.size + count * dim * 4
        if meta_offset != expected_meta_offset or len(body) < meta_offset:
            raise IndexFormatError("truncated or inconsistent vector block")
        index = cls(dim=dim)
        vecs = np.frombuffer(body, dtype="<f4", count=count * dim, offset=_HEADER.size)
        vecs = vecs.reshape(count, dim)
        pos = meta_offset
        for i in range(count):
            if pos + 4 > len(body):
                raise IndexFormatError("truncated metadata block")
            (rec_len,) = struct.unpack_from("<I", body, pos)
            pos += 4
            if pos + rec_len > len(body):
                raise IndexFormatError("truncated metadata record")
            try:
                rec = json.loads(body[pos : pos + rec_len].decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise IndexFormatError(f"malformed metadata record {i}: {exc}") from exc
            pos += rec_len
            index._positions[rec["chunk_id"]] = len(index._ids)
            index._ids.append(rec["chunk_id"])
            index._vectors.append(vecs[i].copy())
            index._meta[rec["chunk_id"]] = ChunkMetadata(
                paper_id=rec["paper_id"],
                title=rec["title"],
                authors=tuple(rec["authors"]),
                venue=rec["venue"],
                section_path=rec["section_path"],
            )
        if pos != len(body):
            raise IndexFormatError("trailing bytes after metadata block")
        if len(index._ids) != count:
            raise IndexFormatError("metadata count mismatch")
        index.freeze()
        return index
