// Shared types for the designer client.
export const GRID_W = 72;
export const GRID_H = 128;
export function insideBounds(outer, inner) {
    return (outer[0] <= inner[0] &&
        inner[0] < inner[2] &&
        inner[2] <= outer[2] &&
        outer[1] <= inner[1] &&
        inner[1] < inner[3] &&
        inner[3] <= outer[3]);
}
export function boundsEqual(a, b) {
    return a[0] === b[0] && a[1] === b[1] && a[2] === b[2] && a[3] === b[3];
}
