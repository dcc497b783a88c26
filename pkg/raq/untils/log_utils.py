"""
Configuração de logs com as etiquetas usadas nos executores ([DEBUG], [INFO], [AVISO], [ERRO]).
"""
import logging
import sys

LEVEL_TAGS = {
    logging.DEBUG: "DEBUG",
    logging.INFO: "INFO",
    logging.WARNING: "AVISO",
    logging.ERROR: "ERRO",
    logging.CRITICAL: "ERRO",
}


class TagFormatter(logging.Formatter):
    """Formata `[TAG] mensagem`, com o módulo de origem apenas em modo debug."""

    def __init__(self, debug: bool = False):
        super().__init__()
        self.debug = debug

    def format(self, record: logging.LogRecord) -> str:
        tag = LEVEL_TAGS.get(record.levelno, record.levelname)
        msg = record.getMessage()
        if self.debug:
            msg = f"[{record.name}] {msg}"
        if record.exc_info:
            msg = f"{msg}\n{self.formatException(record.exc_info)}"
        return f"[{tag}] {msg}"


def configure_logging(debug: bool = False) -> None:
    """Instala um único handler no logger `raq` (idempotente)."""
    root = logging.getLogger("raq")
    for handler in list(root.handlers):
        if getattr(handler, "_raq_handler", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(TagFormatter(debug=debug))
    handler._raq_handler = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if debug else logging.INFO)
    root.propagate = False
