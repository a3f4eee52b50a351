// Keyboard teleoperation mapping (documented in README.md):
//   ArrowRight / KeyD -> +x      ArrowLeft / KeyA -> -x
//   ArrowUp    / KeyW -> +y      ArrowDown / KeyS -> -y
// Held keys combine (diagonals move both components); each component is
// scaled to the action bound. No bound keys held -> no action message at
// all, so a paused simulation stays paused.

export const KEY_BINDINGS: Record<string, [number, number]> = {
  ArrowRight: [1, 0],
  KeyD: [1, 0],
  ArrowLeft: [-1, 0],
  KeyA: [-1, 0],
  ArrowUp: [0, 1],
  KeyW: [0, 1],
  ArrowDown: [0, -1],
  KeyS: [0, -1],
};

export function keysToAction(keysHeld: Iterable<string>, actionMax: number): [number, number] | null {
  let dx = 0;
  let dy = 0;
  let any = false;
  for (const key of keysHeld) {
    const dir = KEY_BINDINGS[key];
    if (!dir) continue;
    any = true;
    dx += dir[0];
    dy += dir[1];
  }
  if (!any) return null;
  const clamp = (v: number) => Math.max(-1, Math.min(1, v));
  return [clamp(dx) * actionMax, clamp(dy) * actionMax];
}
