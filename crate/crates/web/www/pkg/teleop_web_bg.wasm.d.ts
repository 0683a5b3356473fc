/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sandbox_free: (a: number, b: number) => void;
export const analyse_tone: (a: number, b: number, c: number) => [number, number, number, number];
export const pid_step_response: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const sandbox_fallen: (a: number) => number;
export const sandbox_map: (a: number) => [number, number];
export const sandbox_new: (a: number, b: number) => [number, number, number];
export const sandbox_press: (a: number, b: number) => [number, number];
export const sandbox_step: (a: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
