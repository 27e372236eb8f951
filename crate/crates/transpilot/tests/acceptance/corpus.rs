//! Shared Python fixture corpus: twenty entry functions spanning the
//! supported statement subset, each with five runnable argument tuples.
//!
//! The block-extraction checks and the instrumentation-preservation
//! checks both iterate this list, so every program here must terminate
//! on all five inputs and print deterministically.

pub struct Fixture {
    pub name: &'static str,
    pub entry: &'static str,
    pub source: &'static str,
    /// JSON argument arrays, one per test run.
    pub inputs: [&'static str; 5],
}

/// Name of the fixture whose block structure is pinned exactly (a
/// straight block, a `for` header, three consecutive assignments, a
/// `while`, an `if`, and two returns).
pub const STRUCTURED_EXAMPLE: &str = "loop_reduce";

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "loop_reduce",
            entry: "process",
            source: "def process(nums):\n    total = 0\n    for n in nums:\n        d = n * 2\n        e = d + 1\n        total += e\n    while total > 100:\n        total -= 10\n    if total % 2 == 0:\n        return total\n    return total + 1\n",
            inputs: ["[[1, 2, 3]]", "[[]]", "[[50, 60]]", "[[10, 20, 7]]", "[[9]]"],
        },
        Fixture {
            name: "classify",
            entry: "classify",
            source: "def classify(n):\n    if n < 0:\n        return \"negative\"\n    elif n == 0:\n        return \"zero\"\n    elif n < 10:\n        return \"small\"\n    else:\n        return \"large\"\n",
            inputs: ["[-5]", "[0]", "[3]", "[10]", "[99]"],
        },
        Fixture {
            name: "sum_even",
            entry: "sum_even",
            source: "def sum_even(nums):\n    total = 0\n    for n in nums:\n        if n % 2 != 0:\n            continue\n        total += n\n    return total\n",
            inputs: ["[[1, 2, 3, 4]]", "[[]]", "[[2, 4, 6]]", "[[1, 3, 5]]", "[[-2, 7, 8]]"],
        },
        Fixture {
            name: "find_first",
            entry: "find_first",
            source: "def find_first(xs, key):\n    pos = -1\n    i = 0\n    for x in xs:\n        if x == key:\n            pos = i\n            break\n        i += 1\n    return pos\n",
            inputs: ["[[1, 2, 3], 2]", "[[1, 2, 3], 9]", "[[], 1]", "[[5, 5], 5]", "[[4, 3, 2, 1], 1]"],
        },
        Fixture {
            name: "lookup_else",
            entry: "lookup",
            source: "def lookup(xs, key):\n    found = -1\n    for i in range(len(xs)):\n        if xs[i] == key:\n            found = i\n            break\n    else:\n        found = -2\n    return found\n",
            inputs: ["[[1, 2], 2]", "[[1, 2], 9]", "[[], 0]", "[[7], 7]", "[[3, 3, 3], 3]"],
        },
        Fixture {
            name: "safe_div",
            entry: "safe_div",
            source: "def safe_div(a, b):\n    try:\n        q = a // b\n    except ZeroDivisionError:\n        return -1\n    else:\n        q += 0\n    return q\n",
            inputs: ["[7, 2]", "[7, 0]", "[0, 3]", "[-9, 4]", "[100, 10]"],
        },
        Fixture {
            name: "bounded",
            entry: "bounded",
            source: "def bounded(x):\n    steps = 0\n    while True:\n        if x <= 1:\n            break\n        x = x // 2\n        steps += 1\n    return steps\n",
            inputs: ["[1]", "[2]", "[100]", "[0]", "[1023]"],
        },
        Fixture {
            name: "gcd",
            entry: "gcd",
            source: "def gcd(a, b):\n    while b != 0:\n        a, b = b, a % b\n    return a\n",
            inputs: ["[12, 18]", "[7, 13]", "[0, 5]", "[42, 0]", "[100, 75]"],
        },
        Fixture {
            name: "collatz_steps",
            entry: "collatz_steps",
            source: "def collatz_steps(n):\n    steps = 0\n    while n != 1:\n        if n % 2 == 0:\n            n = n // 2\n        else:\n            n = 3 * n + 1\n        steps += 1\n    return steps\n",
            inputs: ["[1]", "[2]", "[3]", "[7]", "[27]"],
        },
        Fixture {
            name: "matrix_sum",
            entry: "matrix_sum",
            source: "def matrix_sum(rows):\n    total = 0\n    for row in rows:\n        for v in row:\n            total += v\n    return total\n",
            inputs: ["[[[1, 2], [3, 4]]]", "[[[]]]", "[[]]", "[[[5], [6], [7]]]", "[[[1, 1, 1], [2, 2, 2]]]"],
        },
        Fixture {
            name: "count_chars",
            entry: "count_chars",
            source: "def count_chars(s):\n    counts = {}\n    for ch in s:\n        if ch in counts:\n            counts[ch] += 1\n        else:\n            counts[ch] = 1\n    return counts\n",
            inputs: ["[\"abca\"]", "[\"\"]", "[\"zzz\"]", "[\"ab ba\"]", "[\"xyz\"]"],
        },
        Fixture {
            name: "emit_steps",
            entry: "emit_steps",
            source: "def emit_steps(n):\n    total = 0\n    for i in range(n):\n        print(\"step\", i)\n        total += i\n    return total\n",
            inputs: ["[0]", "[1]", "[3]", "[5]", "[2]"],
        },
        Fixture {
            name: "mean",
            entry: "mean",
            source: "def mean(xs):\n    if len(xs) == 0:\n        return 0.0\n    total = 0.0\n    for x in xs:\n        total += x\n    return total / len(xs)\n",
            inputs: ["[[1.0, 2.0, 3.0]]", "[[]]", "[[2.5]]", "[[1, 2]]", "[[0.1, 0.2, 0.3]]"],
        },
        Fixture {
            name: "big_product",
            entry: "big_product",
            source: "def big_product(n):\n    result = 1\n    k = 2\n    while k <= n:\n        result = result * k\n        k += 1\n    return result\n",
            inputs: ["[0]", "[5]", "[10]", "[20]", "[25]"],
        },
        Fixture {
            name: "flatten",
            entry: "flatten",
            source: "def flatten(grid):\n    out = []\n    for row in grid:\n        for v in row:\n            out.append(v)\n    return out\n",
            inputs: ["[[[1, 2], [3]]]", "[[]]", "[[[], []]]", "[[[9, 8, 7]]]", "[[[1], [2], [3]]]"],
        },
        Fixture {
            name: "offsets_multiline",
            entry: "offsets",
            source: "def offsets(k):\n    base = [\n        1,\n        2,\n        3,\n    ]\n    out = []\n    for b in base:\n        out.append(b + k)\n    return out\n",
            inputs: ["[0]", "[10]", "[-1]", "[100]", "[7]"],
        },
        Fixture {
            name: "guarded",
            entry: "guarded",
            source: "def guarded(n):\n    result = 0\n    try:\n        if n < 0:\n            raise ValueError(\"negative\")\n        result = n * 2\n    except ValueError:\n        result = -1\n    finally:\n        result += 1\n    return result\n",
            inputs: ["[5]", "[0]", "[-3]", "[10]", "[-1]"],
        },
        Fixture {
            name: "with_helper",
            entry: "with_helper",
            source: "def with_helper(x):\n    def bump(v):\n        return v + 1\n    y = bump(x)\n    z = bump(y)\n    return z\n",
            inputs: ["[0]", "[5]", "[-2]", "[100]", "[41]"],
        },
        Fixture {
            name: "shout",
            entry: "shout",
            source: "def shout(words):\n    out = \"\"\n    for w in words:\n        if len(w) > 3:\n            out = out + w.upper() + \"!\"\n        else:\n            out = out + w\n    return out\n",
            inputs: ["[[\"hey\", \"hello\"]]", "[[]]", "[[\"a\", \"bb\"]]", "[[\"loud\", \"quiet\"]]", "[[\"x\", \"yyyy\", \"zz\"]]"],
        },
        Fixture {
            name: "interleave",
            entry: "interleave",
            source: "def interleave(a, b):\n    out = []\n    i = 0\n    j = 0\n    while i < len(a) or j < len(b):\n        if i < len(a):\n            out.append(a[i])\n            i += 1\n        if j < len(b):\n            out.append(b[j])\n            j += 1\n    return out\n",
            inputs: ["[[1, 3], [2, 4]]", "[[], []]", "[[1], []]", "[[], [9, 9]]", "[[1, 2, 3], [4]]"],
        },
    ]
}
