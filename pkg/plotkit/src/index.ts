export { FIGURES, renderEndpointHist, renderPhaseScan, renderRateFunction, renderSkeletonOverlay, renderWulff } from "./figures";
export { InputError, loadInput } from "./io";
export { halfplanePolygon, normBall } from "./geometry";
