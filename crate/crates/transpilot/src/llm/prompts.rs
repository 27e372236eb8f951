//! The prompt library: one template per agent interaction.
//!
//! Templates live here rather than beside their agents so that the
//! whole conversational surface of the pipeline is reviewable in one
//! place and the replay digest space is stable. Every template carries
//! a one-shot worked example shaping the output format; code-producing
//! prompts ask for a fenced block, the aligner asks for `BLOCKi ->
//! lines a-b` rows, and the semantic cloze prompts delimit the removed
//! region with `--1--`/`--2--` markers.

use super::template::{OneShot, PromptTemplate};

/// Marker opening the removed region in cloze prompts.
pub const CLOZE_OPEN: &str = "--1--";
/// Marker closing the removed region in cloze prompts.
pub const CLOZE_CLOSE: &str = "--2--";
/// Placeholder standing in for the removed code itself.
pub const CLOZE_SLOT: &str = "Fill in the Correct Code Here";

/// Ask for test inputs for a source program.
pub const TEST_INPUTS: PromptTemplate = PromptTemplate {
    name: "test_inputs",
    system: "You are an expert software test engineer. You design small, varied inputs \
             that exercise boundary cases.",
    skeleton: "\
Please generate {{count}} inputs for the given {{language}} program.
{{encoding_rules}}
Cover ordinary cases and boundaries (empty collections, zeros, negatives) where the \
signature allows.

{{language}} program:
```
{{code}}
```

Reply with a fenced code block containing a JSON array of exactly {{count}} inputs and \
nothing else.",
    one_shot: Some(OneShot {
        user: "\
Please generate 3 inputs for the given python program.
Each input is a JSON array holding the arguments for one call of the entry function, \
in order.
Cover ordinary cases and boundaries (empty collections, zeros, negatives) where the \
signature allows.

python program:
```
def add(a, b):
    return a + b
```

Reply with a fenced code block containing a JSON array of exactly 3 inputs and \
nothing else.",
        assistant: "```json\n[[1, 2], [0, 0], [-5, 3]]\n```",
    }),
};

/// Direct translation: source program + tests in, target program out.
pub const DIRECT_TRANSLATE: PromptTemplate = PromptTemplate {
    name: "direct_translate",
    system: "You are an expert source-to-source code translator. You translate whole \
             programs faithfully, preserving behavior on every input.",
    skeleton: "\
Translate the following {{source_language}} program into {{target_language}}.
Keep the entry function named `{{entry}}` with the same parameters in the same order.
The translation must pass these tests, where each input is applied to the entry \
function and the expected output is compared with its return value:

{{tests}}

{{source_language}} program:
```
{{code}}
```

Reply with the complete {{target_language}} program in a single fenced code block.",
    one_shot: Some(OneShot {
        user: "\
Translate the following python program into cpp.
Keep the entry function named `triple` with the same parameters in the same order.
The translation must pass these tests, where each input is applied to the entry \
function and the expected output is compared with its return value:

input [2] -> expected output 6
input [0] -> expected output 0

python program:
```
def triple(x):
    return 3 * x
```

Reply with the complete cpp program in a single fenced code block.",
        assistant: "```cpp\nint triple(int x) {\n    return 3 * x;\n}\n```",
    }),
};

/// Syntax fixing, stage 1: plan the fix for one diagnostic.
pub const SYNTAX_PLAN: PromptTemplate = PromptTemplate {
    name: "syntax_plan",
    system: "You are an expert compiler engineer. You diagnose syntax and type errors \
             precisely and plan minimal fixes.",
    skeleton: "\
The following {{language}} program fails syntax validation.

{{language}} program:
```
{{code}}
```

Error message:
{{error}}

Buggy location: {{location}}

Explain what causes this error and give a short, numbered plan of fixing strategies. \
Do not rewrite the program yet.",
    one_shot: Some(OneShot {
        user: "\
The following python program fails syntax validation.

python program:
```
def f(x):
    return x +
```

Error message:
invalid syntax

Buggy location: line 2

Explain what causes this error and give a short, numbered plan of fixing strategies. \
Do not rewrite the program yet.",
        assistant: "The expression after `+` is missing, so the parser reaches the end \
of line 2 mid-expression.\n1. Complete the binary expression on line 2 with its \
intended right operand.\n2. If no second operand is intended, drop the trailing `+`.",
    }),
};

/// Syntax fixing, stage 2: apply the plan, emit the whole program.
pub const SYNTAX_PATCH: PromptTemplate = PromptTemplate {
    name: "syntax_patch",
    system: "You are an expert compiler engineer. You apply fix plans exactly and \
             return complete compilable programs.",
    skeleton: "\
The following {{language}} program fails syntax validation.

{{language}} program:
```
{{code}}
```

Error message:
{{error}}

Fixing plan:
{{plan}}

Apply the plan. Reply with the entire corrected {{language}} program in a single \
fenced code block; change nothing unrelated to the plan.",
    one_shot: Some(OneShot {
        user: "\
The following python program fails syntax validation.

python program:
```
def f(x):
    return x +
```

Error message:
invalid syntax

Fixing plan:
1. Complete the binary expression on line 2 with its intended right operand.

Apply the plan. Reply with the entire corrected python program in a single \
fenced code block; change nothing unrelated to the plan.",
        assistant: "```python\ndef f(x):\n    return x + 1\n```",
    }),
};

/// Block alignment: numbered source blocks to target line ranges.
pub const ALIGN_BLOCKS: PromptTemplate = PromptTemplate {
    name: "align_blocks",
    system: "You are an expert at reading two programs side by side and mapping which \
             lines implement which logic.",
    skeleton: "\
A {{source_language}} program was translated into {{target_language}}. The source is \
divided into numbered blocks; the target is shown with line numbers. For every source \
block, identify the contiguous range of target lines that implements it.

Source program with blocks:
{{source_blocks}}

Target program with line numbers:
{{target_numbered}}

Reply with one line per source block, in block order, formatted exactly as
BLOCK<i> -> lines <start>-<end>
Use each target line in at most one range.",
    one_shot: Some(OneShot {
        user: "\
A python program was translated into cpp. The source is divided into numbered blocks; \
the target is shown with line numbers. For every source block, identify the contiguous \
range of target lines that implements it.

Source program with blocks:
def total(xs):
    # BLOCK1
    s = 0
    # BLOCK2
    for x in xs:
        # BLOCK3
        s += x
    # BLOCK4
    return s

Target program with line numbers:
1: int total(std::vector<int> xs) {
2:     int s = 0;
3:     for (size_t i = 0; i < xs.size(); i++) {
4:         s += xs[i];
5:     }
6:     return s;
7: }

Reply with one line per source block, in block order, formatted exactly as
BLOCK<i> -> lines <start>-<end>
Use each target line in at most one range.",
        assistant: "BLOCK1 -> lines 2-2\nBLOCK2 -> lines 3-3\nBLOCK3 -> lines 4-4\nBLOCK4 -> lines 6-6",
    }),
};

/// Semantic patch, vanilla strategy: static context only.
pub const SEMANTIC_VANILLA: PromptTemplate = PromptTemplate {
    name: "semantic_vanilla",
    system: "You are an expert at repairing translated programs. You reason about what \
             a removed code region must do, then write it.",
    skeleton: "\
A {{target_language}} program translated from {{source_language}} produces wrong \
results. The faulty code region has been removed from the target program below; the \
removed region sits between the markers --1-- and --2--.

Original {{source_language}} program:
```
{{source_code}}
```

The source block corresponding to the removed region:
```
{{source_block}}
```

{{target_language}} program with the faulty region removed:
```
{{cloze}}
```

First explain in one or two sentences what the removed region must compute so the \
target matches the source. Then reply with only the replacement code for the region \
between --1-- and --2--, in a single fenced code block, indented to fit its position.",
    one_shot: Some(OneShot {
        user: "\
A cpp program translated from python produces wrong results. The faulty code region \
has been removed from the target program below; the removed region sits between the \
markers --1-- and --2--.

Original python program:
```
def double(x):
    y = x * 2
    return y
```

The source block corresponding to the removed region:
```
    y = x * 2
```

cpp program with the faulty region removed:
```
int double_(int x) {
    --1--
    Fill in the Correct Code Here
    --2--
    return y;
}
```

First explain in one or two sentences what the removed region must compute so the \
target matches the source. Then reply with only the replacement code for the region \
between --1-- and --2--, in a single fenced code block, indented to fit its position.",
        assistant: "The removed region must declare `y` and set it to twice `x`, \
matching the source assignment.\n```cpp\n    int y = x * 2;\n```",
    }),
};

/// Semantic patch, value-aware strategy: static context plus the
/// diverging runtime values.
pub const SEMANTIC_VALUE_AWARE: PromptTemplate = PromptTemplate {
    name: "semantic_value_aware",
    system: "You are an expert at repairing translated programs. You compare expected \
             and actual runtime values to pinpoint what a removed code region must do, \
             then write it.",
    skeleton: "\
A {{target_language}} program translated from {{source_language}} produces wrong \
results. The faulty code region has been removed from the target program below; the \
removed region sits between the markers --1-- and --2--.

Original {{source_language}} program:
```
{{source_code}}
```

The source block corresponding to the removed region:
```
{{source_block}}
```

{{target_language}} program with the faulty region removed:
```
{{cloze}}
```

Runtime evidence at this region ({{divergence}}):
Expected values, observed in the source program:
{{expected_values}}
Actual values, observed in the faulty target program:
{{actual_values}}

First explain in one or two sentences why the actual values diverge from the expected \
ones. Then reply with only the replacement code for the region between --1-- and \
--2--, in a single fenced code block, indented to fit its position.",
    one_shot: Some(OneShot {
        user: "\
A cpp program translated from python produces wrong results. The faulty code region \
has been removed from the target program below; the removed region sits between the \
markers --1-- and --2--.

Original python program:
```
def half(x):
    y = x / 2
    return y
```

The source block corresponding to the removed region:
```
    y = x / 2
```

cpp program with the faulty region removed:
```
double half(int x) {
    --1--
    Fill in the Correct Code Here
    --2--
    return y;
}
```

Runtime evidence at this region (value mismatch):
Expected values, observed in the source program:
y = 2.5
Actual values, observed in the faulty target program:
y = 2

First explain in one or two sentences why the actual values diverge from the expected \
ones. Then reply with only the replacement code for the region between --1-- and \
--2--, in a single fenced code block, indented to fit its position.",
        assistant: "`x / 2` is integer division in cpp, truncating 2.5 to 2; the \
division must happen in floating point.\n```cpp\n    double y = x / 2.0;\n```",
    }),
};

/// Every template, for enumeration in docs and replay tooling.
pub const ALL: [&PromptTemplate; 7] = [
    &TEST_INPUTS,
    &DIRECT_TRANSLATE,
    &SYNTAX_PLAN,
    &SYNTAX_PATCH,
    &ALIGN_BLOCKS,
    &SEMANTIC_VANILLA,
    &SEMANTIC_VALUE_AWARE,
];
