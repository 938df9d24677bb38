"""Domain records of the shop."""


class Item:
    def __init__(self, sku, price):
        self.sku = sku
        self.price = price


class Order:
    def __init__(self, number):
        self.number = number
        self.lines = []

    def total(self):
        return sum(line.price for line in self.lines)
