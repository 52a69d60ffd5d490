from .expr import (
    CompiledExpressions,
    DomainError,
    ExprSyntaxError,
    UnknownIdentifier,
    eval_expression,
    parse_expression,
    to_source,
)
from .system import (
    DocumentError,
    SystemSpecDocument,
    catalog_names,
    load,
    load_document,
    load_system,
    resolve_document,
)
