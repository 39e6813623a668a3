"""Title-block extraction, canonicalization, evaluation and metadata search."""

from ._tbx import *  # noqa: F401,F403
from ._tbx import TbxError, RecordStore  # noqa: F401
