class DefaultKwargs(dict):
    """Keyword defaults that fill the gaps of a partial option dict.

    Calling the instance with a dict returns a new ``DefaultKwargs`` where
    every key missing from (or ``None`` in) ``other`` takes the default.
    The argument itself is left untouched.
    """

    def __init__(self, ref: dict):
        super().__init__(ref)

    def __call__(self, other: dict | None = None) -> "DefaultKwargs":
        merged = dict(other or {})
        for k, v in self.items():
            if merged.get(k) is None:
                merged[k] = v

        return DefaultKwargs(merged)
