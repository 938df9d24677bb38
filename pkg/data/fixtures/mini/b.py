"""Command line entry of the mini application."""
import sys

from a import n


def main(argv):
    for name in argv:
        print(n.render(name))


if __name__ == '__main__':
    main(sys.argv[1:])
