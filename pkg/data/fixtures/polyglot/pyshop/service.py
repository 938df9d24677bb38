"""Order workflows."""
from . import pricing
from .store import MemoryStore


class OrderService:
    def __init__(self):
        self.store = MemoryStore()

    def quote(self, number):
        order = self.store.load_order(number)
        return pricing.with_tax(order.total())
