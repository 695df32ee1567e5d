//! Parse a chatty strategy-model reply and print the canonical list.

use dystil::strategy::{format_for_prompt, parse_strategy_list};

const REPLY: &str = "Sure, here is the updated list:

1. **Advance when clear and safe:**
   - Move forward when nothing is directly ahead.
2) **Turn early near walls:** a wall 1 step forward means turn now.
3. Avoid balls
   - They move every step.
   - Never walk into one.

Let me know if you want more detail.";

fn main() {
    match parse_strategy_list(REPLY) {
        Ok(list) => {
            println!("{} items:\n{}", list.len(), format_for_prompt(&list));
        }
        Err(e) => println!("rejected: {e}"),
    }
    println!(
        "\nplain chatter: {:?}",
        parse_strategy_list("I think the agent should be careful.").err()
    );
}
