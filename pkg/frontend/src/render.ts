/**
 * CLI: render one figure from solver CSV output.
 *
 *   node dist/render.js --in sweep.csv --kind sweep --out sweep.svg
 *
 * Kinds: sweep | convergence | control | state.  The control kind accepts
 * several atom CSVs and overlays them; everything else takes exactly one
 * input.  Nothing is written when reading or rendering fails.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { readCsv } from "./csv.js";
import {
    RenderOptions,
    renderControl,
    renderConvergence,
    renderField,
    renderSweep,
} from "./kinds.js";

const KIND_TO_SCHEMA: Record<string, string> = {
    sweep: "sweep",
    convergence: "convergence",
    control: "atoms",
    state: "field",
};

export interface CliArgs {
    inputs: string[];
    kind: string;
    out: string;
    options: RenderOptions;
}

export function parseArgs(argv: string[]): CliArgs {
    const inputs: string[] = [];
    let kind = "";
    let out = "";
    const options: RenderOptions = {};
    for (let i = 0; i < argv.length; i++) {
        const arg = argv[i];
        switch (arg) {
            case "--in":
                while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
                    inputs.push(argv[++i]);
                }
                break;
            case "--kind":
                kind = argv[++i] ?? "";
                break;
            case "--out":
                out = argv[++i] ?? "";
                break;
            case "--field":
                options.field = argv[++i];
                break;
            case "--metric":
                options.metric = argv[++i];
                break;
            case "--title":
                options.title = argv[++i];
                break;
            case "--x-log":
                options.xLog = true;
                break;
            default:
                throw new Error(`unknown argument '${arg}'`);
        }
    }
    if (inputs.length === 0) throw new Error("--in <csv...> is required");
    if (!(kind in KIND_TO_SCHEMA)) {
        throw new Error(`--kind must be one of ${Object.keys(KIND_TO_SCHEMA).join(", ")}`);
    }
    if (!out) throw new Error("--out <image.svg> is required");
    return { inputs, kind, out, options };
}

export function renderToString(args: CliArgs): string {
    const schema = KIND_TO_SCHEMA[args.kind];
    const tables = args.inputs.map((p) => readCsv(p, schema));
    if (args.kind !== "control" && tables.length !== 1) {
        throw new Error(`kind '${args.kind}' takes exactly one input file`);
    }
    switch (args.kind) {
        case "sweep":
            return renderSweep(tables[0], args.options);
        case "convergence":
            return renderConvergence(tables[0], args.options);
        case "control":
            return renderControl(tables, args.options);
        default:
            return renderField(tables[0], args.options);
    }
}

export function main(argv: string[]): number {
    let args: CliArgs;
    try {
        args = parseArgs(argv);
    } catch (err) {
        console.error(`argument error: ${(err as Error).message}`);
        return 2;
    }
    try {
        const svg = renderToString(args);
        fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
        fs.writeFileSync(args.out, svg);
        console.error(`wrote ${args.out}`);
        return 0;
    } catch (err) {
        console.error(`render error: ${(err as Error).message}`);
        return 1;
    }
}

if (process.argv[1] && process.argv[1].endsWith("render.js")) {
    process.exit(main(process.argv.slice(2)));
}
