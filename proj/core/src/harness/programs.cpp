#include "supertile/harness/programs.hpp"

namespace supertile::harness {

std::string_view overlapping_return_program() {
  return R"(_start:
    xor eax, eax
    mov al, 0xC2
    test rdi, rdi
    jz ret_c2
ret_c3:
    .byte 0xB0          ; mov al, imm8 swallowing the ret below
ret_c2:
    .byte 0xC3
    ret
)";
}

std::string_view jump_table_program() {
  return R"(_start:
    and rdi, 3
    shl rdi, 1          ; each inc eax is two bytes
    xor eax, eax
    call table
    inc eax
    inc eax
    inc eax
    inc eax
    ret
table:
    pop rsi
    add rsi, rdi
    jmp rsi
)";
}

std::string_view counted_loop_program() {
  return R"(_start:
    xor eax, eax
    mov rcx, rdi
    test rcx, rcx
    jz done
again:
    add rax, rcx
    dec rcx
    jnz again
done:
    mov rdi, rax
    call __exit
)";
}

std::string_view chained_arithmetic_program() {
  return R"(_start:
    mov rax, rdi
    add rax, 7
    sub rax, 3
    xor rbx, rbx
    add rbx, rax
    shl rbx, 2
    and rbx, 0xff0
    or rbx, 1
    inc rax
    dec rbx
    sub rbx, rax
    add rcx, rbx
    cmp rax, 100
    jl small
    mov rdi, rax
    call __exit
small:
    mov rdi, rcx
    call __exit
)";
}

}  // namespace supertile::harness
