/* tslint:disable */
/* eslint-disable */

export class Sandbox {
    free(): void;
    [Symbol.dispose](): void;
    fallen(): boolean;
    map(): string;
    constructor(scenario: string);
    press(key: string): void;
    /**
     * One tick; returns the telemetry record as JSON.
     */
    step(): string;
}

export function analyse_tone(key: string, noise: number, seed: number): string;

export function pid_step_response(kp: number, ki: number, kd: number, tau: number, seconds: number, dt: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sandbox_free: (a: number, b: number) => void;
    readonly analyse_tone: (a: number, b: number, c: number) => [number, number, number, number];
    readonly pid_step_response: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sandbox_fallen: (a: number) => number;
    readonly sandbox_map: (a: number) => [number, number];
    readonly sandbox_new: (a: number, b: number) => [number, number, number];
    readonly sandbox_press: (a: number, b: number) => [number, number];
    readonly sandbox_step: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
