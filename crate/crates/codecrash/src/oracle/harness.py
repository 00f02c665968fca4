import io
import json
import sys


def emit(real_stdout, result):
    payload = json.dumps(result).encode("utf-8")
    real_stdout.write(b"CCRESULT " + str(len(payload)).encode("ascii") + b"\n" + payload)
    real_stdout.flush()


def main():
    real_stdout = sys.stdout.buffer
    req = json.loads(sys.stdin.readline())
    mode = req["mode"]
    trace = bool(req.get("trace", False))
    cap = int(req.get("stdout_cap", 65536))
    mem = req.get("memory_cap")
    if mem:
        try:
            import resource

            resource.setrlimit(resource.RLIMIT_AS, (int(mem), int(mem)))
        except Exception:
            pass

    result = {
        "status": "ok",
        "value_repr": None,
        "exception_type": None,
        "stdout": "",
        "executed_lines": None,
    }

    class CappedIO(io.StringIO):
        def write(self, s):
            remaining = cap - self.tell()
            if remaining > 0:
                super().write(s[:remaining])
            return len(s)

    try:
        code_obj = compile(req["code"], "<snippet>", "exec")
    except SyntaxError:
        result["status"] = "syntax_error"
        result["exception_type"] = "SyntaxError"
        emit(real_stdout, result)
        return

    target = None
    try:
        if mode == "call":
            target = compile(req["expr"], "<call>", "eval")
        elif mode == "assert":
            target = compile(req["assertion"], "<assertion>", "exec")
    except SyntaxError:
        result["status"] = "syntax_error"
        result["exception_type"] = "SyntaxError"
        emit(real_stdout, result)
        return

    executed = set()

    def tracer(frame, event, arg):
        if frame.f_code.co_filename == "<snippet>":
            if event == "line":
                executed.add(frame.f_lineno)
            return tracer
        return None

    buf = CappedIO()
    env = {"__name__": "__main__"}
    sys.stdout = buf
    if trace:
        sys.settrace(tracer)
    try:
        exec(code_obj, env)
        if mode == "call":
            value = eval(target, env)
            result["value_repr"] = repr(value)
        elif mode == "assert":
            exec(target, env)
    except AssertionError:
        result["status"] = "assert_fail"
    except RecursionError:
        result["status"] = "exception"
        result["exception_type"] = "RecursionError"
    except BaseException as exc:
        result["status"] = "exception"
        result["exception_type"] = type(exc).__name__
    finally:
        if trace:
            sys.settrace(None)
        sys.stdout = sys.__stdout__
    if trace:
        result["executed_lines"] = sorted(executed)
    result["stdout"] = buf.getvalue()
    emit(real_stdout, result)


main()
