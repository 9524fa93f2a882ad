export class ShapeError extends Error {}
export class TooLong extends Error {}
export class StageMismatch extends Error {}
export class NonFiniteLoss extends Error {}
