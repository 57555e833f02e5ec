import os
import random
import string
import tempfile
from pathlib import Path
from typing import Optional, Union

PathLike = Union[str, "os.PathLike[str]"]


def create_temp_filename(suffix: str = "", directory: Optional[PathLike] = None) -> str:
    random_seq = "".join(random.choice(string.ascii_letters) for _ in range(10))
    directory = tempfile.gettempdir() if directory is None else os.fspath(directory)
    return os.path.join(directory, f"{tempfile.gettempprefix()}_{random_seq}{suffix}")


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Writes `data` to a sibling temp file, then renames it over `path`.

    Readers never observe a partially written file.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temp = create_temp_filename(".part", target.parent)
    try:
        with open(temp, "wb") as f:
            f.write(data)
        os.replace(temp, target)
    except BaseException:
        if os.path.exists(temp):
            os.remove(temp)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
