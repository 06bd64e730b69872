import { describe, expect, it } from "vitest";

import {
  DEFAULT_EPSILON, DEFAULT_GAMMA, FormatError, parseParams, serializeParams,
  type IspParams,
} from "../src/index.js";

const REF: IspParams = {
  wbGains: [2.0, 1.0, 1.6],
  ccm: [[1.52, -0.38, -0.14], [-0.29, 1.47, -0.18], [-0.04, -0.46, 1.5]],
  gamma: 2.2,
  epsilon: 1e-8,
};

describe("params codec", () => {
  it("round-trips every value exactly, including awkward doubles", () => {
    const p: IspParams = {
      wbGains: [1.9999999999999998, 1 / 3, 1.6],
      ccm: [[1.52, -0.38, -0.14], [-0.29, 1.47, -0.18], [-0.04, -0.46, 1.5000000000000002]],
      gamma: 2.2000000000000006,
      epsilon: 1.0000000000000002e-8,
    };
    const back = parseParams(serializeParams(p));
    expect(back).toEqual(p);
  });

  it("parses files written by the CLI (python repr floats)", () => {
    const text = [
      "# rendering-chain parameters",
      "wb_gains = 2.0 1.0 1.6",
      "ccm_row0 = 1.52 -0.38 -0.14",
      "ccm_row1 = -0.29 1.47 -0.18",
      "ccm_row2 = -0.04 -0.46 1.5",
      "gamma = 2.2",
      "epsilon = 1e-08",
      "",
    ].join("\n");
    expect(parseParams(text)).toEqual(REF);
  });

  it("applies gamma/epsilon defaults and strips comments and blanks", () => {
    const text = [
      "wb_gains = 2.0 1.0 1.6   # trailing comment",
      "",
      "ccm_row0 = 1.52 -0.38 -0.14",
      "ccm_row1 = -0.29 1.47 -0.18",
      "ccm_row2 = -0.04 -0.46 1.5",
    ].join("\n");
    const p = parseParams(text);
    expect(p.gamma).toBe(DEFAULT_GAMMA);
    expect(p.epsilon).toBe(DEFAULT_EPSILON);
    expect(p.wbGains).toEqual([2.0, 1.0, 1.6]);
  });

  it("ignores unknown keys unless strict", () => {
    const text = serializeParams(REF) + "flux_capacitor = 1.21\n";
    expect(parseParams(text)).toEqual(REF);
    expect(() => parseParams(text, { strict: true })).toThrow(/unknown key/);
  });

  it("rejects duplicates, missing keys, wrong arity, and junk floats", () => {
    expect(() => parseParams(serializeParams(REF) + "gamma = 2.4\n")).toThrow(/duplicate/);
    expect(() => parseParams("gamma = 2.2\n")).toThrow(/wb_gains/);
    const noRow = serializeParams(REF).split("\n").filter((l) => !l.startsWith("ccm_row1")).join("\n");
    expect(() => parseParams(noRow)).toThrow(/ccm_row1/);
    expect(() => parseParams("wb_gains = 2.0 1.0\n")).toThrow(/expected 3/);
    expect(() => parseParams("wb_gains = 2.0 1.0 party\n")).toThrow(/not a float/);
    expect(() => parseParams("wb_gains\n")).toThrow(FormatError);
  });
});
