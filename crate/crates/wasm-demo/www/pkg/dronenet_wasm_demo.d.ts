/* tslint:disable */
/* eslint-disable */

/**
 * Mean queueing delay against per-drone utilization for an M/G/K base.
 * `scv` is the squared coefficient of variation of the service time.
 */
export function delay_curve(servers: number, mean_service: number, scv: number, points: number): string;

/**
 * Random network with `demands` request points and three candidate bases,
 * solved exactly and by the greedy rule.
 */
export function random_network(seed: number, demands: number): string;

/**
 * Survival curves over 0..20 minutes plus the survivor, QALY and cost
 * table for one drone/ambulance comparison.
 */
export function survival_report(drone_minutes: number, ems_minutes: number, overdoses: number, drones: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly delay_curve: (a: number, b: number, c: number, d: number) => [number, number];
    readonly random_network: (a: number, b: number) => [number, number];
    readonly survival_report: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
