"""
Checkpoint 二進位格式（全部 little-endian）：

    magic          8 bytes   b'CLABCKPT'
    version        u16       目前為 1
    config_sha256  32 bytes  config 文字的 SHA-256
    config_len     u32       之後接 config_len bytes 的 UTF-8 config 文字
    store_count    u16
    每個 store：
        name_len u16, name (UTF-8)
        step     u64
        param_count u16
        每個參數：
            name_len u16, name (UTF-8)
            ndim u8, 接著 ndim 個 u32 維度
            value / first_moment / second_moment 三段 float64 陣列
"""
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from diffcore.store import ParamStore

MAGIC = b'CLABCKPT'
FORMAT_VERSION = 1
_F64 = np.dtype('<f8')


class CorruptCheckpoint(ValueError):
    pass


class MissingArtifact(RuntimeError):
    pass


@dataclass
class Checkpoint:
    config_text: str
    config_hash: bytes
    stores: dict


def config_digest(config_text: str) -> bytes:
    return hashlib.sha256(config_text.encode('utf-8')).digest()


def _pack_name(name: str) -> bytes:
    raw = name.encode('utf-8')
    return struct.pack('<H', len(raw)) + raw


def serialize_store(store: ParamStore) -> bytes:
    chunks = [_pack_name(store.name), struct.pack('<QH', store.step, len(store.params))]
    for key, tensor in store.params.items():
        chunks.append(_pack_name(key))
        chunks.append(struct.pack('<B', tensor.ndim) + struct.pack(f'<{tensor.ndim}I', *tensor.shape))
        for array in (tensor.data, store.first_moment[key], store.second_moment[key]):
            chunks.append(np.ascontiguousarray(array, dtype=_F64).tobytes())
    return b''.join(chunks)


class _Reader:

    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise CorruptCheckpoint(f"檔案在 offset {self.offset} 被截斷")
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (length,) = self.unpack('<H')
        try:
            return self.take(length).decode('utf-8')
        except UnicodeDecodeError as e:
            raise CorruptCheckpoint(f"名稱不是合法 UTF-8：{e}") from e

    def array(self, shape: tuple) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.take(count * _F64.itemsize)
        return np.frombuffer(raw, dtype=_F64).reshape(shape).astype(np.float64)


def _read_store(reader: _Reader) -> ParamStore:
    store = ParamStore(reader.name())
    store.step, param_count = reader.unpack('<QH')
    for _ in range(param_count):
        key = reader.name()
        (ndim,) = reader.unpack('<B')
        shape = tuple(reader.unpack(f'<{ndim}I')) if ndim else ()
        value = reader.array(shape)
        store.add(key, value)
        store.first_moment[key] = reader.array(shape)
        store.second_moment[key] = reader.array(shape)
    return store


def serialize_checkpoint(config_text: str, stores: dict) -> bytes:
    config_raw = config_text.encode('utf-8')
    chunks = [
        MAGIC,
        struct.pack('<H', FORMAT_VERSION),
        config_digest(config_text),
        struct.pack('<I', len(config_raw)),
        config_raw,
        struct.pack('<H', len(stores)),
    ]
    chunks.extend(serialize_store(store) for store in stores.values())
    return b''.join(chunks)


def deserialize_checkpoint(payload: bytes) -> Checkpoint:
    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptCheckpoint("magic 不符，不是 checkpoint 檔")
    (version,) = reader.unpack('<H')
    if version != FORMAT_VERSION:
        raise CorruptCheckpoint(f"不支援的格式版本 {version}（預期 {FORMAT_VERSION}）")
    config_hash = reader.take(32)
    (config_len,) = reader.unpack('<I')
    try:
        config_text = reader.take(config_len).decode('utf-8')
    except UnicodeDecodeError as e:
        raise CorruptCheckpoint(f"config 不是合法 UTF-8：{e}") from e
    if config_digest(config_text) != config_hash:
        raise CorruptCheckpoint("config hash 不符")

    (store_count,) = reader.unpack('<H')
    stores = {}
    for _ in range(store_count):
        store = _read_store(reader)
        stores[store.name] = store
    if reader.offset != len(payload):
        raise CorruptCheckpoint(f"檔尾多出 {len(payload) - reader.offset} bytes")
    return Checkpoint(config_text=config_text, config_hash=config_hash, stores=stores)


def save_checkpoint(path, config_text: str, stores: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + '.tmp')
    tmp_path.write_bytes(serialize_checkpoint(config_text, stores))
    tmp_path.replace(path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"找不到 checkpoint：{path}")
    return deserialize_checkpoint(path.read_bytes())
