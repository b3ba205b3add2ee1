import hashlib
import os

from asr_ward.settings import asr_ward_settings


def stable_hash64(text: str) -> int:
    """64-bit hash of a string that is identical across runs and platforms
    (unlike the builtin `hash`, which is salted per process)."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, key: str) -> int:
    """Per-item seed so items can be processed in any order or in parallel"""
    return stable_hash64(f"{seed}:{key}")


def file_sha256(filepath: str) -> str:
    sha = hashlib.sha256()
    with open(filepath, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def get_worker_count() -> int:
    if asr_ward_settings.threads:
        return max(1, asr_ward_settings.threads)
    return os.cpu_count() or 1


def conversation_of(example_id: str) -> str:
    """Example ids are `<conversation_id>/<segment index>`"""
    return example_id.rsplit("/", 1)[0]


def make_example_id(conversation_id: str, segment_index: int) -> str:
    return f"{conversation_id}/{segment_index:04d}"
