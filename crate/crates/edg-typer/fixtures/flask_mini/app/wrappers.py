class Request:
    method = "GET"

    def is_secure(self):
        return False


class Response:
    status_code = 200

    def set_status(self, code=200):
        self.status_code = code
        return self
