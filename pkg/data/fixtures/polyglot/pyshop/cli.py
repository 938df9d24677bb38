"""Command line entry of the shop."""
import sys

from pyshop.service import OrderService


def main(argv):
    service = OrderService()
    for number in argv:
        print(service.quote(number))
    return 0


if __name__ == '__main__':
    sys.exit(main(sys.argv[1:]))
