/** Current-frame navigation, clamped to [0, frameCount). */

export class Scrubber {
  private frame = 0;

  constructor(public readonly frameCount: number) {
    if (frameCount < 1) throw new Error("scrubber needs at least one frame");
  }

  get current(): number {
    return this.frame;
  }

  seek(frame: number): number {
    this.frame = Math.min(Math.max(Math.trunc(frame), 0), this.frameCount - 1);
    return this.frame;
  }

  step(delta: number): number {
    return this.seek(this.frame + delta);
  }
}

/** Keyboard map: arrows step one frame, shift-arrows ten. */
export function stepForKey(key: string, shift: boolean): number | null {
  const unit = shift ? 10 : 1;
  if (key === "ArrowLeft") return -unit;
  if (key === "ArrowRight") return unit;
  return null;
}
