from app.hooks import ResponseHook


class RequestContext:
    _after_request_functions: list[ResponseHook] = []

    def hook_count(self):
        return len(self._after_request_functions)
