"""Message catalogs for the mreg CLI, picked from MREG_LANG or the locale."""

import importlib
import os
from typing import Dict, Optional

LANG_VARS = ("MREG_LANG", "LC_ALL", "LC_MESSAGES", "LANG")

_catalog: Dict[str, str] = {}
_english: Dict[str, str] = {}


def detect_language() -> str:
    """Two-letter code of the first usable variable in LANG_VARS ("ja_JP.UTF-8" -> "ja")."""
    for var in LANG_VARS:
        value = os.environ.get(var, "")
        if value in ("", "C", "POSIX"):
            continue
        code = value.split(".")[0].split("_")[0].lower()
        if len(code) == 2:
            return code
    return "en"


def _load(lang: str) -> Optional[Dict[str, str]]:
    try:
        return importlib.import_module(f"masked_regression.messages.{lang}").MESSAGES
    except (ImportError, AttributeError):
        return None


def init(lang: Optional[str] = None) -> str:
    """Activate a catalog and return its language; unknown languages get English."""
    global _catalog, _english
    _english = _load("en")
    lang = lang or detect_language()
    catalog = _load(lang)
    if catalog is None:
        catalog, lang = _english, "en"
    _catalog = catalog
    return lang


def msg(key: str, **kwargs) -> str:
    if not _catalog:
        init()
    template = _catalog.get(key) or _english.get(key) or key
    if not kwargs:
        return template
    try:
        return template.format(**kwargs)
    except (KeyError, IndexError):
        return template
