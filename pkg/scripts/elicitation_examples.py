"""Run every elicitation criterion on the textbook fixtures and the orange market."""

import sys

from svipha import elicitation as el
from svipha.instances import orange_market, textbook_examples


def show(name, data, e2=None, e3=None):
    print(name)
    for rep in el.elicit_all(data, e2=e2, e3=e3):
        if rep.applicable:
            rel = ">" if rep.strict else ">="
            print(f"  {rep.criterion:5s} s {rel} {rep.level_bound:.6g}")
        else:
            print(f"  {rep.criterion:5s} n/a ({rep.reason})")


def main():
    for name, ex in textbook_examples().items():
        show(name, el.ElicitationData.from_matrices(ex.M, ex.P_M), e2=ex.e2)
    show("orange", el.ElicitationData.from_problem(orange_market().to_problem()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
