"""Price rules."""
from pyshop.models import Item

TAX_RATE = 0.2


def with_tax(amount):
    return round(amount * (1 + TAX_RATE), 2)


def line_price(item: Item, quantity):
    return with_tax(item.price * quantity)
