class Shape:
    def area(self, unit=1):
        return unit


class Square(Shape):
    def area(self, unit=1):
        return unit * unit
