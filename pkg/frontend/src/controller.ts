/** Session controller: owns UI state and talks to the service.
 *
 * The DOM layer subscribes for redraws and forwards pointer events; every
 * pixel it displays comes from bytes fetched here. One mutation in flight
 * at a time: clicks while busy are dropped, never queued.
 */

import { hitInstance } from "./hitTest.js";
import { canMutate, initialState, reduce } from "./state.js";
import type { UiEvent, UiState } from "./state.js";
import type { ApiClient, MutationResponse } from "./types.js";

export class EraserController {
  private state: UiState = initialState();
  private listeners: Array<(state: UiState) => void> = [];
  private originalBytes: Uint8Array | null = null;
  private currentBytes: Uint8Array | null = null;

  constructor(private readonly api: ApiClient) {}

  getState(): UiState {
    return this.state;
  }

  /** Original scene image (before any erase), as served. */
  getOriginalBytes(): Uint8Array | null {
    return this.originalBytes;
  }

  /** Image for the present erased set, as served. */
  getCurrentBytes(): Uint8Array | null {
    return this.currentBytes;
  }

  subscribe(listener: (state: UiState) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private dispatch(event: UiEvent): void {
    this.state = reduce(this.state, event);
    this.notify();
  }

  /** Fetch the scene and both images; safe to call again to reload. */
  async init(): Promise<void> {
    const payload = await this.api.getScene();
    this.dispatch({ type: "scene-loaded", payload });
    this.originalBytes = await this.api.fetchImage(payload.image_url);
    this.currentBytes = payload.erased.length
      ? await this.api.fetchImage(this.state.currentImageUrl)
      : this.originalBytes;
    this.notify();
  }

  /** Hoverable instance id under the cursor, or null over background/busy. */
  hover(x: number, y: number): string | null {
    if (!canMutate(this.state)) return null;
    return hitInstance(this.state.instances, this.state.erased, x, y);
  }

  /** Click-to-erase: resolves the hit and erases it; no-op over background. */
  async clickAt(x: number, y: number): Promise<void> {
    const id = this.hover(x, y);
    if (id === null) return;
    await this.mutate(() => this.api.erase([id]));
  }

  async undo(): Promise<void> {
    if (!canMutate(this.state)) return;
    await this.mutate(() => this.api.undo());
  }

  private async mutate(call: () => Promise<MutationResponse>): Promise<void> {
    this.dispatch({ type: "mutation-started" });
    try {
      const response = await call();
      const bytes = await this.api.fetchImage(response.image_url);
      this.currentBytes = bytes;
      this.dispatch({ type: "mutation-acknowledged", response });
    } catch (e) {
      this.dispatch({ type: "mutation-failed", message: e instanceof Error ? e.message : String(e) });
    }
  }
}
