"""Persistence of orders."""
from .models import Order


class Store:
    def load_order(self, number):
        raise NotImplementedError


class MemoryStore(Store):
    def __init__(self):
        self.orders = {}

    def load_order(self, number):
        return self.orders.get(number) or Order(number)

    def keep(self, order):
        self.orders[order.number] = order
