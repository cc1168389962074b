"""Hypothesis generators shared by the property tests."""
from fractions import Fraction

from hypothesis import strategies as st

from lastsuccess.profiles import explicit, karamata, records

probabilities = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(49, 50), max_denominator=60)


@st.composite
def profiles(draw, min_len=31):
    kind = draw(st.sampled_from(["records", "karamata", "explicit"]))
    if kind == "records":
        return records()
    if kind == "karamata":
        return karamata(draw(st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(3, 4),
                                              Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5)])))
    probs = draw(st.lists(probabilities, min_size=min_len, max_size=min_len + 5))
    if draw(st.booleans()):
        probs[0] = Fraction(1)
    return explicit(probs)
