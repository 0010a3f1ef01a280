"""Exception hierarchy shared by all animkp modules."""


class AnimKPError(Exception):
    """Base class for every error raised by animkp."""


class InvalidParameter(AnimKPError, ValueError):
    pass


class DegenerateKeypoints(AnimKPError, ValueError):
    """Keypoints carry no spread, so no scale can be regressed from them."""


class NearSingular(AnimKPError, ArithmeticError):
    """A 2x2 matrix whose determinant is too small to invert safely.

    ``det`` holds the offending determinant. ``keypoint`` and ``frame`` are
    filled in by callers that know which keypoint/frame produced the matrix.
    """

    def __init__(self, det, eps, keypoint=None, frame=None):
        self.det = float(det)
        self.eps = float(eps)
        self.keypoint = keypoint
        self.frame = frame
        super().__init__(self._message())

    def _message(self):
        where = []
        if self.frame is not None:
            where.append(f"frame {self.frame}")
        if self.keypoint is not None:
            where.append(f"keypoint {self.keypoint}")
        loc = f" ({', '.join(where)})" if where else ""
        return f"|det| = {abs(self.det):.3e} below eps = {self.eps:.1e}{loc}"

    def at(self, keypoint=None, frame=None):
        """Return a copy annotated with location info."""
        return NearSingular(
            self.det,
            self.eps,
            keypoint=self.keypoint if keypoint is None else keypoint,
            frame=self.frame if frame is None else frame,
        )


class StreamError(AnimKPError):
    pass


class BadMagic(StreamError):
    pass


class UnsupportedVersion(StreamError):
    pass


class TruncatedStream(StreamError, EOFError):
    """Stream ended before the announced payload was read.

    ``frame`` is the index of the first frame that could not be decoded.
    """

    def __init__(self, message, frame=None):
        self.frame = frame
        super().__init__(message)
