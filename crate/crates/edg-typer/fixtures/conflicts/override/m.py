class Base:
    def describe(self, width=''):
        return 'plain'


class Child(Base):
    def describe(self, width=''):
        return 'child'
