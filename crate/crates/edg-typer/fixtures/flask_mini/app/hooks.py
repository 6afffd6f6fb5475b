class ResponseHook:
    def label(self):
        return "hook"
