from contextvars import ContextVar

from app.ctx import RequestContext

_cv_request: ContextVar[RequestContext] = ContextVar("app.request_ctx")
